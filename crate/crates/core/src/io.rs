//! JSON file formats: system inputs, analysis reports, and reduction
//! outputs that round-trip bit-exactly.
//!
//! System files are human-authored, so their matrices are plain JSON
//! numbers (an entry is either a real number or a `[re, im]` pair) and the
//! schema is strict: unknown keys, missing parts, or a wrong
//! `schema_version` are rejected rather than guessed. Reduction files are
//! machine-written: every matrix entry is stored as a C99 hexadecimal
//! float pair, which survives any JSON printer without rounding, next to a
//! decimal mirror for human eyes that is never read back. Each reduction
//! file carries provenance: the SHA-256 of the source system file, the
//! tool version, the rank tolerance, and the seed when randomness was
//! involved.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{CMatrix, RankTolerance};
use crate::model::{DescriptorSystem, IndexReport};
use crate::qw::QuasiWeierstrass;
use crate::reduction::{ReducedSystem, Side, StandardSystem};
use crate::switching::{MismatchReport, SwitchedReduction};

pub const SCHEMA_VERSION: &str = "1";

/// One matrix entry in a system file: `3.5` or `[3.5, -1.0]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EntryData {
    Real(f64),
    Complex([f64; 2]),
}

impl EntryData {
    fn to_complex(self) -> Complex64 {
        match self {
            EntryData::Real(re) => Complex64::new(re, 0.0),
            EntryData::Complex([re, im]) => Complex64::new(re, im),
        }
    }

    fn from_complex(z: Complex64) -> Self {
        if z.im == 0.0 {
            EntryData::Real(z.re)
        } else {
            EntryData::Complex([z.re, z.im])
        }
    }
}

pub type MatrixData = Vec<Vec<EntryData>>;

/// One mode of a switched system.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeData {
    #[serde(rename = "E")]
    pub e: MatrixData,
    #[serde(rename = "A")]
    pub a: MatrixData,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixData>,
}

/// Top-level system file: either one system (`E`, `A`, optional `B`) or a
/// switched family (`modes`), never both. The declared state and input
/// dimensions `n` and `m` must match the matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub schema_version: String,
    pub n: usize,
    pub m: usize,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<MatrixData>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixData>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<ModeData>>,
}

/// What a system file contained.
#[derive(Clone, Debug)]
pub enum LoadedSystem {
    Single(DescriptorSystem),
    Switched(Vec<DescriptorSystem>),
}

fn matrix_from_data(data: &MatrixData, what: &str) -> Result<CMatrix> {
    if data.is_empty() || data[0].is_empty() {
        return Err(Error::Schema(format!("{what} must be a nonempty matrix")));
    }
    let cols = data[0].len();
    for (i, row) in data.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Schema(format!(
                "{what} row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
    }
    let rows: Vec<Vec<Complex64>> = data
        .iter()
        .map(|row| row.iter().map(|e| e.to_complex()).collect())
        .collect();
    CMatrix::from_rows(&rows).map_err(|e| Error::Schema(format!("{what}: {e}")))
}

fn matrix_to_data(m: &CMatrix) -> MatrixData {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| EntryData::from_complex(m.get(i, j)))
                .collect()
        })
        .collect()
}

fn mode_to_system(
    e: &MatrixData,
    a: &MatrixData,
    b: Option<&MatrixData>,
) -> Result<DescriptorSystem> {
    let e = matrix_from_data(e, "E")?;
    let a = matrix_from_data(a, "A")?;
    let b = b.map(|m| matrix_from_data(m, "B")).transpose()?;
    DescriptorSystem::new(e, a, b).map_err(|err| Error::Schema(err.to_string()))
}

fn check_declared_dims(sys: &DescriptorSystem, n: usize, m: usize, what: &str) -> Result<()> {
    if sys.n() != n {
        return Err(Error::Schema(format!(
            "{what}: declared n = {n} but the matrices are {0}x{0}",
            sys.n()
        )));
    }
    let width = sys.b().map_or(0, |b| b.cols());
    if width != m {
        return Err(Error::Schema(format!(
            "{what}: declared m = {m} but the input has {width} columns"
        )));
    }
    Ok(())
}

/// Interprets an already-parsed system file.
pub fn system_from_file(file: &SystemFile) -> Result<LoadedSystem> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
            file.schema_version
        )));
    }
    match (&file.e, &file.a, &file.modes) {
        (Some(e), Some(a), None) => {
            let sys = mode_to_system(e, a, file.b.as_ref())?;
            check_declared_dims(&sys, file.n, file.m, "system")?;
            Ok(LoadedSystem::Single(sys))
        }
        (None, None, Some(modes)) => {
            if file.b.is_some() {
                return Err(Error::Schema(
                    "a switched file carries inputs per mode, not a top-level B".into(),
                ));
            }
            if modes.is_empty() {
                return Err(Error::Schema("modes must not be empty".into()));
            }
            let systems = modes
                .iter()
                .map(|m| mode_to_system(&m.e, &m.a, m.b.as_ref()))
                .collect::<Result<Vec<_>>>()?;
            for (i, sys) in systems.iter().enumerate() {
                check_declared_dims(sys, file.n, file.m, &format!("mode {i}"))?;
            }
            Ok(LoadedSystem::Switched(systems))
        }
        (None, None, None) => Err(Error::Schema(
            "file contains neither a system (E, A) nor modes".into(),
        )),
        _ => Err(Error::Schema(
            "give either E and A (single system) or modes (switched), not a mixture".into(),
        )),
    }
}

/// Serializable form of a single system.
pub fn system_to_file(sys: &DescriptorSystem) -> SystemFile {
    SystemFile {
        schema_version: SCHEMA_VERSION.into(),
        n: sys.n(),
        m: sys.b().map_or(0, |b| b.cols()),
        e: Some(matrix_to_data(sys.e())),
        a: Some(matrix_to_data(sys.a())),
        b: sys.b().map(matrix_to_data),
        modes: None,
    }
}

/// Serializable form of a switched family (assumed dimension-consistent,
/// as `SwitchedDescriptorSystem` guarantees).
pub fn switched_to_file(modes: &[DescriptorSystem]) -> SystemFile {
    SystemFile {
        schema_version: SCHEMA_VERSION.into(),
        n: modes.first().map_or(0, |m| m.n()),
        m: modes.first().and_then(|m| m.b()).map_or(0, |b| b.cols()),
        e: None,
        a: None,
        b: None,
        modes: Some(
            modes
                .iter()
                .map(|m| ModeData {
                    e: matrix_to_data(m.e()),
                    a: matrix_to_data(m.a()),
                    b: m.b().map(matrix_to_data),
                })
                .collect(),
        ),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|err| match err.classify() {
        serde_json::error::Category::Data => Error::Schema(err.to_string()),
        _ => Error::Parse(err.to_string()),
    })
}

/// Reads a system file, returning what it held plus the SHA-256 hex digest
/// of the raw bytes (recorded in reduction provenance).
pub fn read_system_file(path: &Path) -> Result<(LoadedSystem, String)> {
    let bytes = fs::read(path)?;
    let digest: String = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let text = String::from_utf8(bytes)
        .map_err(|err| Error::Parse(format!("{}: {err}", path.display())))?;
    let file: SystemFile = parse_json(&text)?;
    Ok((system_from_file(&file)?, digest))
}

/// Reads a file that must contain a single (non-switched) system.
pub fn read_system(path: &Path) -> Result<DescriptorSystem> {
    match read_system_file(path)?.0 {
        LoadedSystem::Single(sys) => Ok(sys),
        LoadedSystem::Switched(_) => Err(Error::Schema(
            "expected a single system, file contains switched modes".into(),
        )),
    }
}

/// Reads a file that must contain a switched family.
pub fn read_switched(path: &Path) -> Result<Vec<DescriptorSystem>> {
    match read_system_file(path)?.0 {
        LoadedSystem::Switched(modes) => Ok(modes),
        LoadedSystem::Single(_) => Err(Error::Schema(
            "expected switched modes, file contains a single system".into(),
        )),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| Error::Computation(format!("serialization failed: {err}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

// --- exact floating-point text encoding ---

/// `2^e` exactly, for `-1074 <= e <= 1023`; saturates to 0 or infinity
/// outside that range.
fn pow2(e: i32) -> f64 {
    if e < -1074 {
        0.0
    } else if e < -1022 {
        f64::from_bits(1u64 << (e + 1074))
    } else if e <= 1023 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        f64::INFINITY
    }
}

/// Formats a finite `f64` as a C99 hexadecimal float (`-0x1.8p+1`).
/// Round-trips bit-exactly through [`parse_hex_f64`]. Non-finite values
/// render as `inf`/`nan`, which the parser rejects; callers validate
/// finiteness before encoding.
pub fn format_hex_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_field = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_field == 0 && frac == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp_field == 0 {
        ('0', -1022)
    } else {
        ('1', exp_field - 1023)
    };
    let digits = format!("{frac:013x}");
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

/// Parses a C99 hexadecimal float. Exact (single rounding at most, and no
/// rounding at all for anything [`format_hex_f64`] produces).
pub fn parse_hex_f64(text: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("invalid hexadecimal float {text:?}"));
    let s = text.trim();
    let (sign, s) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    let s = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .ok_or_else(bad)?;
    let (mant_text, exp_text) = s.split_once(['p', 'P']).ok_or_else(bad)?;
    let exp: i32 = exp_text.parse().map_err(|_| bad())?;
    let (int_text, frac_text) = match mant_text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mant_text, ""),
    };
    if int_text.is_empty() && frac_text.is_empty() {
        return Err(bad());
    }
    if int_text.len() + frac_text.len() > 32 {
        return Err(Error::Parse(format!(
            "hexadecimal float mantissa too long: {text:?}"
        )));
    }
    let mut mant: u128 = 0;
    for ch in int_text.chars().chain(frac_text.chars()) {
        mant = mant * 16 + ch.to_digit(16).ok_or_else(bad)? as u128;
    }
    if mant == 0 {
        return Ok(sign * 0.0);
    }
    let mut e = exp - 4 * frac_text.len() as i32;
    while mant & 1 == 0 {
        mant >>= 1;
        e += 1;
    }
    // At most one rounding here (only when the mantissa carries more than
    // 53 significant bits, which our own formatter never emits).
    let m = sign * mant as f64;
    // Two factors keep each power in range even for exponents a single
    // f64 power cannot represent.
    let e1 = e.clamp(-1074, 1023);
    let e2 = e - e1;
    Ok(m * pow2(e1) * pow2(e2.clamp(-1074, 1023)))
}

/// A matrix stored exactly: row-major C99 hex-float pairs (`"re im"`) as
/// the authoritative values, plus a decimal mirror for human readers that
/// is ignored on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortableMatrix {
    pub rows: usize,
    pub cols: usize,
    pub hex: Vec<String>,
    #[serde(default)]
    pub approx: Vec<String>,
}

pub fn portable_from_matrix(m: &CMatrix) -> PortableMatrix {
    let mut hex = Vec::with_capacity(m.rows() * m.cols());
    let mut approx = Vec::with_capacity(m.rows() * m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m.get(i, j);
            hex.push(format!("{} {}", format_hex_f64(z.re), format_hex_f64(z.im)));
            approx.push(format!("{} {}", z.re, z.im));
        }
    }
    PortableMatrix {
        rows: m.rows(),
        cols: m.cols(),
        hex,
        approx,
    }
}

pub fn matrix_from_portable(p: &PortableMatrix) -> Result<CMatrix> {
    if p.hex.len() != p.rows * p.cols {
        return Err(Error::Schema(format!(
            "matrix claims {}x{} = {} entries but stores {}",
            p.rows,
            p.cols,
            p.rows * p.cols,
            p.hex.len()
        )));
    }
    let mut entries = Vec::with_capacity(p.hex.len());
    for pair in &p.hex {
        let (re, im) = pair.split_once(' ').ok_or_else(|| {
            Error::Parse(format!("matrix entry {pair:?} is not a \"re im\" pair"))
        })?;
        let z = Complex64::new(parse_hex_f64(re)?, parse_hex_f64(im)?);
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Schema(format!("non-finite matrix entry {pair:?}")));
        }
        entries.push(z);
    }
    let rows: Vec<Vec<Complex64>> = entries.chunks(p.cols.max(1)).map(|c| c.to_vec()).collect();
    if p.cols == 0 || p.rows == 0 {
        return Err(Error::Schema("stored matrices must be nonempty".into()));
    }
    CMatrix::from_rows(&rows).map_err(|e| Error::Schema(e.to_string()))
}

fn optional_portable(m: Option<&CMatrix>) -> Option<PortableMatrix> {
    // Zero-width matrices (no inputs) are stored as absent.
    m.filter(|m| m.cols() > 0 && m.rows() > 0)
        .map(portable_from_matrix)
}

// --- reduction files ---

/// Where a reduction file came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// SHA-256 hex digest of the source system file's bytes.
    pub source_sha256: String,
    pub tool_version: String,
    pub tolerance: RankTolerance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(source_sha256: String, tolerance: RankTolerance, seed: Option<u64>) -> Self {
        Provenance {
            source_sha256,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            tolerance,
            seed,
        }
    }
}

fn side_name(side: Side) -> String {
    side.to_string()
}

fn side_from_name(name: &str) -> Result<Side> {
    match name {
        "range" => Ok(Side::Range),
        "corange" => Ok(Side::Corange),
        other => Err(Error::Schema(format!(
            "side must be \"range\" or \"corange\", got {other:?}"
        ))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedData {
    pub side: String,
    pub k_used: usize,
    pub index: usize,
    pub lambda: [f64; 2],
    pub f_tilde: PortableMatrix,
    pub lift: PortableMatrix,
    pub proj: PortableMatrix,
    /// `proj G`, when the source system has inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_tilde: Option<PortableMatrix>,
}

impl ReducedData {
    pub fn new(red: &ReducedSystem, g_tilde: Option<&CMatrix>) -> Self {
        ReducedData {
            side: side_name(red.side),
            k_used: red.k_used,
            index: red.index,
            lambda: [red.lambda.re, red.lambda.im],
            f_tilde: portable_from_matrix(&red.f_tilde),
            lift: portable_from_matrix(&red.lift),
            proj: portable_from_matrix(&red.proj),
            g_tilde: optional_portable(g_tilde),
        }
    }

    pub fn to_system(&self) -> Result<ReducedSystem> {
        Ok(ReducedSystem {
            f_tilde: matrix_from_portable(&self.f_tilde)?,
            lambda: Complex64::new(self.lambda[0], self.lambda[1]),
            lift: matrix_from_portable(&self.lift)?,
            proj: matrix_from_portable(&self.proj)?,
            k_used: self.k_used,
            index: self.index,
            side: side_from_name(&self.side)?,
        })
    }

    pub fn g_tilde_matrix(&self) -> Result<Option<CMatrix>> {
        self.g_tilde.as_ref().map(matrix_from_portable).transpose()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardData {
    pub side: String,
    pub lambda: [f64; 2],
    pub a_tilde: PortableMatrix,
    pub lift: PortableMatrix,
    pub proj: PortableMatrix,
    /// Input matrix of the explicit ODE, when the source has inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_tilde: Option<PortableMatrix>,
}

impl StandardData {
    pub fn new(
        std_form: &StandardSystem,
        side: Side,
        lambda: Complex64,
        b_tilde: Option<&CMatrix>,
    ) -> Self {
        StandardData {
            side: side_name(side),
            lambda: [lambda.re, lambda.im],
            a_tilde: portable_from_matrix(&std_form.a_tilde),
            lift: portable_from_matrix(&std_form.lift),
            proj: portable_from_matrix(&std_form.proj),
            b_tilde: optional_portable(b_tilde),
        }
    }

    pub fn to_system(&self) -> Result<StandardSystem> {
        Ok(StandardSystem {
            a_tilde: matrix_from_portable(&self.a_tilde)?,
            lift: matrix_from_portable(&self.lift)?,
            proj: matrix_from_portable(&self.proj)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QwData {
    pub lambda: [f64; 2],
    pub k_nilpotent: usize,
    pub a_tilde: PortableMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1_tilde: Option<PortableMatrix>,
    pub n_tilde: PortableMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2_tilde: Option<PortableMatrix>,
    pub lift1: PortableMatrix,
    pub lift2: PortableMatrix,
    pub proj1: PortableMatrix,
    pub proj2: PortableMatrix,
}

impl QwData {
    pub fn new(qw: &QuasiWeierstrass) -> Self {
        QwData {
            lambda: [qw.lambda.re, qw.lambda.im],
            k_nilpotent: qw.k_nilpotent,
            a_tilde: portable_from_matrix(&qw.a_tilde),
            b1_tilde: optional_portable(Some(&qw.b1_tilde)),
            n_tilde: portable_from_matrix(&qw.n_tilde),
            b2_tilde: optional_portable(Some(&qw.b2_tilde)),
            lift1: portable_from_matrix(&qw.lift1),
            lift2: portable_from_matrix(&qw.lift2),
            proj1: portable_from_matrix(&qw.proj1),
            proj2: portable_from_matrix(&qw.proj2),
        }
    }

    pub fn to_decomposition(&self) -> Result<QuasiWeierstrass> {
        let a_tilde = matrix_from_portable(&self.a_tilde)?;
        let n_tilde = matrix_from_portable(&self.n_tilde)?;
        let b1_tilde = match &self.b1_tilde {
            Some(m) => matrix_from_portable(m)?,
            None => CMatrix::zeros(a_tilde.rows(), 0),
        };
        let b2_tilde = match &self.b2_tilde {
            Some(m) => matrix_from_portable(m)?,
            None => CMatrix::zeros(n_tilde.rows(), 0),
        };
        if b1_tilde.cols() != b2_tilde.cols() {
            return Err(Error::Schema(format!(
                "b1_tilde and b2_tilde disagree on the input count: {} vs {}",
                b1_tilde.cols(),
                b2_tilde.cols()
            )));
        }
        Ok(QuasiWeierstrass {
            a_tilde,
            b1_tilde,
            n_tilde,
            b2_tilde,
            lift1: matrix_from_portable(&self.lift1)?,
            lift2: matrix_from_portable(&self.lift2)?,
            proj1: matrix_from_portable(&self.proj1)?,
            proj2: matrix_from_portable(&self.proj2)?,
            k_nilpotent: self.k_nilpotent,
            lambda: Complex64::new(self.lambda[0], self.lambda[1]),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchedModeData {
    pub f_tilde: PortableMatrix,
    pub a_tilde: PortableMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_tilde: Option<PortableMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_tilde: Option<PortableMatrix>,
    pub commutation_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairAngleData {
    pub mode_a: usize,
    pub mode_b: usize,
    pub angle: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchedData {
    pub lambda: [f64; 2],
    pub indices: Vec<usize>,
    pub basis: PortableMatrix,
    pub proj: PortableMatrix,
    pub modes: Vec<SwitchedModeData>,
    pub pairs: Vec<PairAngleData>,
    pub angle_tol: f64,
}

impl SwitchedData {
    pub fn new(red: &SwitchedReduction, angle_tol: f64) -> Self {
        SwitchedData {
            lambda: [red.lambda.re, red.lambda.im],
            indices: red.indices.clone(),
            basis: portable_from_matrix(&red.basis),
            proj: portable_from_matrix(&red.proj),
            modes: red
                .modes
                .iter()
                .map(|m| SwitchedModeData {
                    f_tilde: portable_from_matrix(&m.f_tilde),
                    a_tilde: portable_from_matrix(&m.a_tilde),
                    g_tilde: optional_portable(m.g_tilde.as_ref()),
                    b_tilde: optional_portable(m.b_tilde.as_ref()),
                    commutation_residual: m.commutation_residual,
                })
                .collect(),
            pairs: red
                .pairs
                .iter()
                .map(|p| PairAngleData {
                    mode_a: p.mode_a,
                    mode_b: p.mode_b,
                    angle: p.angle,
                })
                .collect(),
            angle_tol,
        }
    }

    pub fn to_reduction(&self) -> Result<SwitchedReduction> {
        Ok(SwitchedReduction {
            basis: matrix_from_portable(&self.basis)?,
            proj: matrix_from_portable(&self.proj)?,
            modes: self
                .modes
                .iter()
                .map(|m| {
                    Ok(crate::switching::ReducedMode {
                        f_tilde: matrix_from_portable(&m.f_tilde)?,
                        a_tilde: matrix_from_portable(&m.a_tilde)?,
                        g_tilde: m.g_tilde.as_ref().map(matrix_from_portable).transpose()?,
                        b_tilde: m.b_tilde.as_ref().map(matrix_from_portable).transpose()?,
                        commutation_residual: m.commutation_residual,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            indices: self.indices.clone(),
            pairs: self
                .pairs
                .iter()
                .map(|p| MismatchReport {
                    mode_a: p.mode_a,
                    mode_b: p.mode_b,
                    angle: p.angle,
                })
                .collect(),
            lambda: Complex64::new(self.lambda[0], self.lambda[1]),
        })
    }
}

/// The kind-specific payload of a reduction file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum ReductionPayload {
    Reduced(ReducedData),
    Standard(StandardData),
    Qw(QwData),
    Switched(SwitchedData),
}

/// A reduction result on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionFile {
    pub schema_version: String,
    pub provenance: Provenance,
    pub reduction: ReductionPayload,
}

impl ReductionFile {
    pub fn new(provenance: Provenance, reduction: ReductionPayload) -> Self {
        ReductionFile {
            schema_version: SCHEMA_VERSION.into(),
            provenance,
            reduction,
        }
    }
}

pub fn read_reduction(path: &Path) -> Result<ReductionFile> {
    let text = fs::read_to_string(path)?;
    let file: ReductionFile = parse_json(&text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unsupported schema_version {:?}, expected {SCHEMA_VERSION:?}",
            file.schema_version
        )));
    }
    Ok(file)
}

/// Analysis report as written by the CLI. `regular` is always true in a
/// written report: analysis of an irregular pencil fails before reporting.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexReportData {
    pub schema_version: String,
    pub regular: bool,
    #[serde(rename = "index")]
    pub k_star: usize,
    pub rank_sequence: Vec<usize>,
    pub consistency_dim: usize,
    pub is_pure: bool,
    pub lambda: [f64; 2],
}

impl IndexReportData {
    pub fn new(report: &IndexReport) -> Self {
        IndexReportData {
            schema_version: SCHEMA_VERSION.into(),
            regular: true,
            k_star: report.k_star,
            rank_sequence: report.rank_sequence.clone(),
            consistency_dim: report.consistency_dim,
            is_pure: report.is_pure,
            lambda: [report.lambda.re, report.lambda.im],
        }
    }
}
