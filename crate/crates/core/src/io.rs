//! File formats: JSON descriptions of systems, states and networks, CSV
//! pulse and trajectory data, and the flattened tensor format.
//!
//! All floating-point output is written with 17 significant digits so that
//! files round-trip bit-exactly. Writers go through a temporary file and an
//! atomic rename, so failed runs leave no partial outputs behind.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, CMat, RMat, RVec};
use crate::model::PhysicalParams;
use crate::network::SLHNode;
use crate::photon::{PulseShape, PulseTensor};

pub const SCHEMA_VERSION: u64 = 1;

/// 17-significant-digit decimal rendering; parses back to the same f64.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub type JsonCMat = Vec<Vec<[f64; 2]>>;
pub type JsonRMat = Vec<Vec<f64>>;

pub fn cmat_to_json(m: &CMat) -> JsonCMat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn cmat_from_json(v: &JsonCMat, rows: usize, cols: usize, field: &str) -> Result<CMat> {
    if v.len() != rows || v.iter().any(|r| r.len() != cols) {
        return Err(Error::Schema(format!(
            "{field}: expected a {rows}x{cols} matrix"
        )));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| {
        C64::new(v[i][j][0], v[i][j][1])
    }))
}

pub fn rmat_to_json(m: &RMat) -> JsonRMat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rmat_from_json(v: &JsonRMat, field: &str) -> Result<RMat> {
    let rows = v.len();
    let cols = v.first().map(|r| r.len()).unwrap_or(0);
    if v.iter().any(|r| r.len() != cols) {
        return Err(Error::Schema(format!("{field}: ragged matrix")));
    }
    Ok(RMat::from_fn(rows, cols, |i, j| v[i][j]))
}

/// Atomic text write: temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SystemFile {
    pub schema_version: u64,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub s: JsonCMat,
    pub c_minus: JsonCMat,
    pub c_plus: JsonCMat,
    pub omega_minus: JsonCMat,
    pub omega_plus: JsonCMat,
    pub k: JsonCMat,
}

impl SystemFile {
    pub fn from_params(p: &PhysicalParams) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: p.n,
            m: p.m,
            l: p.l,
            s: cmat_to_json(&p.s),
            c_minus: cmat_to_json(&p.c_minus),
            c_plus: cmat_to_json(&p.c_plus),
            omega_minus: cmat_to_json(&p.omega_minus),
            omega_plus: cmat_to_json(&p.omega_plus),
            k: cmat_to_json(&p.k_drive),
        }
    }

    pub fn to_params(&self) -> Result<PhysicalParams> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        let (n, m, l) = (self.n, self.m, self.l);
        PhysicalParams::new(
            cmat_from_json(&self.s, m, m, "s")?,
            cmat_from_json(&self.c_minus, m, n, "c_minus")?,
            cmat_from_json(&self.c_plus, m, n, "c_plus")?,
            cmat_from_json(&self.omega_minus, n, n, "omega_minus")?,
            cmat_from_json(&self.omega_plus, n, n, "omega_plus")?,
            cmat_from_json(&self.k, 2 * n, 2 * l, "k")?,
        )
    }
}

pub fn parse_system_file(path: &Path) -> Result<PhysicalParams> {
    let text = std::fs::read_to_string(path)?;
    let file: SystemFile =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    file.to_params()
}

pub fn write_system_file(path: &Path, p: &PhysicalParams) -> Result<()> {
    let file = SystemFile::from_params(p);
    write_atomic(path, &serde_json::to_string_pretty(&file)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub schema_version: u64,
    pub mean: Vec<f64>,
    pub cov: JsonRMat,
}

impl StateFile {
    pub fn from_state(state: &crate::gaussian::GaussianState) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mean: state.mean.iter().copied().collect(),
            cov: rmat_to_json(&state.cov),
        }
    }

    pub fn to_state(&self) -> Result<crate::gaussian::GaussianState> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        crate::gaussian::GaussianState::new(
            RVec::from_column_slice(&self.mean),
            rmat_from_json(&self.cov, "cov")?,
        )
    }
}

pub fn parse_state_file(path: &Path) -> Result<crate::gaussian::GaussianState> {
    let text = std::fs::read_to_string(path)?;
    let file: StateFile =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    file.to_state()
}

pub fn write_state_file(path: &Path, state: &crate::gaussian::GaussianState) -> Result<()> {
    let file = StateFile::from_state(state);
    write_atomic(path, &serde_json::to_string_pretty(&file)?)
}

/// CSV writer with a fixed header; every value rendered by [`fmt_g17`].
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension(format!(
                "csv row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let line: Vec<String> = row.iter().map(|x| fmt_g17(*x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Pulse CSV: columns t, re, im.
pub fn write_pulse_csv(path: &Path, pulse: &PulseShape) -> Result<()> {
    write_csv(
        path,
        &["t", "re", "im"],
        pulse
            .times()
            .zip(&pulse.samples)
            .map(|(t, z)| vec![t, z.re, z.im]),
    )
}

/// In/out pulse pair CSV: columns t, re_in, im_in, re_out, im_out.
pub fn write_pulse_pair_csv(path: &Path, input: &PulseShape, output: &PulseShape) -> Result<()> {
    if input.len() != output.len() {
        return Err(Error::Dimension("pulse pair grids differ".into()));
    }
    write_csv(
        path,
        &["t", "re_in", "im_in", "re_out", "im_out"],
        input
            .times()
            .zip(input.samples.iter().zip(&output.samples))
            .map(|(t, (a, b))| vec![t, a.re, a.im, b.re, b.im]),
    )
}

pub fn read_pulse_csv(path: &Path) -> Result<PulseShape> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            let header: Vec<&str> = line.split(',').map(str::trim).collect();
            if header != ["t", "re", "im"] {
                return Err(Error::Schema(format!(
                    "pulse csv header must be t,re,im (got {line:?})"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Schema(format!("pulse csv line {idx}: need 3 fields")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Schema(format!("pulse csv line {idx}: {e}")))
        };
        times.push(parse(fields[0])?);
        samples.push(C64::new(parse(fields[1])?, parse(fields[2])?));
    }
    if times.len() < 2 {
        return Err(Error::Schema("pulse csv needs at least two samples".into()));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::Schema("pulse csv grid is not uniform".into()));
        }
    }
    PulseShape::new(times[0], dt, samples)
}

/// Tensor file: a header line `channels,grid_len,ell,t0,dt` followed by the
/// flattened entries as `re,im` lines.
pub fn write_tensor_file(path: &Path, tensor: &PulseTensor) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "{},{},{},{},{}\n",
        tensor.channels,
        tensor.grid_len,
        tensor.ell,
        fmt_g17(tensor.t0),
        fmt_g17(tensor.dt)
    ));
    for z in &tensor.data {
        out.push_str(&format!("{},{}\n", fmt_g17(z.re), fmt_g17(z.im)));
    }
    write_atomic(path, &out)
}

pub fn read_tensor_file(path: &Path) -> Result<PulseTensor> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("tensor file is empty".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 5 {
        return Err(Error::Schema("tensor header must be channels,grid_len,ell,t0,dt".into()));
    }
    let channels: usize = fields[0]
        .trim()
        .parse()
        .map_err(|e| Error::Schema(format!("tensor header: {e}")))?;
    let grid_len: usize = fields[1]
        .trim()
        .parse()
        .map_err(|e| Error::Schema(format!("tensor header: {e}")))?;
    let ell: usize = fields[2]
        .trim()
        .parse()
        .map_err(|e| Error::Schema(format!("tensor header: {e}")))?;
    let t0: f64 = fields[3]
        .trim()
        .parse()
        .map_err(|e| Error::Schema(format!("tensor header: {e}")))?;
    let dt: f64 = fields[4]
        .trim()
        .parse()
        .map_err(|e| Error::Schema(format!("tensor header: {e}")))?;
    let mut data = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Schema(format!("tensor line {idx}: need re,im")));
        }
        let re: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|e| Error::Schema(format!("tensor line {idx}: {e}")))?;
        let im: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|e| Error::Schema(format!("tensor line {idx}: {e}")))?;
        data.push(C64::new(re, im));
    }
    PulseTensor::new(channels, grid_len, ell, t0, dt, data)
}

/// Node reference inside a network description.
#[derive(Debug, Serialize, Deserialize)]
pub struct NodeSpec {
    /// Path to the system JSON, relative to the network file.
    pub system: String,
    pub label: String,
    #[serde(default)]
    pub phase: Option<f64>,
    #[serde(default)]
    pub input_partition: Option<[usize; 3]>,
    #[serde(default)]
    pub output_partition: Option<[usize; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DirectCouplingSpec {
    pub k_minus: JsonCMat,
    pub k_plus: JsonCMat,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClosedLoopSpec {
    pub plant: NodeSpec,
    pub controller: NodeSpec,
    #[serde(default)]
    pub direct_coupling: Option<DirectCouplingSpec>,
}

/// Network description: either a cascade (series products applied left to
/// right, each optionally preceded by a phase shifter) or a closed loop.
#[derive(Debug, Serialize, Deserialize)]
pub struct NetworkFile {
    pub schema_version: u64,
    #[serde(default)]
    pub cascade: Option<Vec<NodeSpec>>,
    #[serde(default)]
    pub closed_loop: Option<ClosedLoopSpec>,
}

fn load_node(spec: &NodeSpec, base: &Path, mode_prefix: &str) -> Result<SLHNode> {
    let path: PathBuf = if Path::new(&spec.system).is_absolute() {
        PathBuf::from(&spec.system)
    } else {
        base.join(&spec.system)
    };
    let params = parse_system_file(&path)?;
    let modes = (0..params.n)
        .map(|i| format!("{mode_prefix}:{i}"))
        .collect();
    let mut node = SLHNode::from_physical(spec.label.clone(), modes, &params)?;
    if let Some(p) = spec.input_partition {
        node.input_partition = p;
    }
    if let Some(p) = spec.output_partition {
        node.output_partition = p;
    }
    if let Some(phi) = spec.phase {
        node = crate::network::apply_static(&crate::network::phase_shifter(phi), &node)?;
    }
    Ok(node)
}

/// Result of evaluating a network description.
pub enum NetworkResult {
    Cascade(SLHNode),
    ClosedLoop(crate::network::ClosedLoopSystem),
}

pub fn evaluate_network_file(path: &Path) -> Result<NetworkResult> {
    let text = std::fs::read_to_string(path)?;
    let file: NetworkFile =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unsupported schema_version {}",
            file.schema_version
        )));
    }
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    match (&file.cascade, &file.closed_loop) {
        (Some(chain), None) => {
            if chain.is_empty() {
                return Err(Error::Schema("cascade must name at least one node".into()));
            }
            let mut acc = load_node(&chain[0], &base, &chain[0].label)?;
            for spec in &chain[1..] {
                let next = load_node(spec, &base, &spec.label)?;
                acc = crate::network::series(&next, &acc)?;
            }
            Ok(NetworkResult::Cascade(acc))
        }
        (None, Some(cl)) => {
            let plant = load_node(&cl.plant, &base, &cl.plant.label)?;
            let controller = load_node(&cl.controller, &base, &cl.controller.label)?;
            let coupling = match &cl.direct_coupling {
                Some(spec) => {
                    let km = cmat_from_json(
                        &spec.k_minus,
                        controller.n(),
                        plant.n(),
                        "direct_coupling.k_minus",
                    )?;
                    let kp = cmat_from_json(
                        &spec.k_plus,
                        controller.n(),
                        plant.n(),
                        "direct_coupling.k_plus",
                    )?;
                    Some((km, kp))
                }
                None => None,
            };
            let system = match &coupling {
                Some((km, kp)) => crate::network::closed_loop(&plant, &controller, Some((km, kp)))?,
                None => crate::network::closed_loop(&plant, &controller, None)?,
            };
            Ok(NetworkResult::ClosedLoop(system))
        }
        _ => Err(Error::Schema(
            "network file must contain exactly one of `cascade` or `closed_loop`".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn system_file_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = synth::random_params(2, 2, 1, &mut rng);
        let dir = std::env::temp_dir().join("lqs_io_test_sys");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("sys.json");
        write_system_file(&path, &p).unwrap();
        let back = parse_system_file(&path).unwrap();
        assert_eq!(p, back);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn schema_and_invariant_errors() {
        let dir = std::env::temp_dir().join("lqs_io_test_bad");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");

        std::fs::write(&path, "{\"schema_version\": 99}").unwrap();
        assert!(matches!(parse_system_file(&path), Err(Error::Schema(_))));

        // non-unitary S must be named in the error
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = synth::random_params(1, 1, 0, &mut rng);
        let mut file = SystemFile::from_params(&p);
        file.s[0][0] = [2.0, 0.0];
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        match parse_system_file(&path) {
            Err(Error::Parameter(msg)) => assert!(msg.contains('S'), "message: {msg}"),
            other => panic!("expected parameter error, got {other:?}"),
        }

        assert!(matches!(
            parse_system_file(Path::new("/nonexistent/x.json")),
            Err(Error::Io(_))
        ));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn state_and_pulse_roundtrips() {
        let dir = std::env::temp_dir().join("lqs_io_test_state");
        std::fs::create_dir_all(&dir).unwrap();
        let state = crate::gaussian::GaussianState::squeezed_thermal(0.7, 0.3);
        let spath = dir.join("state.json");
        write_state_file(&spath, &state).unwrap();
        assert_eq!(parse_state_file(&spath).unwrap(), state);

        let pulse = PulseShape::gaussian(-3.0, 0.25, 32, 0.5, 1.0);
        let ppath = dir.join("pulse.csv");
        write_pulse_csv(&ppath, &pulse).unwrap();
        let back = read_pulse_csv(&ppath).unwrap();
        assert_eq!(pulse.samples, back.samples);
        assert_eq!(pulse.t0, back.t0);
        assert_eq!(pulse.dt, back.dt);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn tensor_roundtrip() {
        let dir = std::env::temp_dir().join("lqs_io_test_tensor");
        std::fs::create_dir_all(&dir).unwrap();
        let pulse = PulseShape::gaussian(-2.0, 0.5, 8, 0.0, 1.0);
        let tensor = PulseTensor::separable(&[vec![pulse.clone()], vec![pulse]]).unwrap();
        let path = dir.join("tensor.dat");
        write_tensor_file(&path, &tensor).unwrap();
        let back = read_tensor_file(&path).unwrap();
        assert_eq!(tensor, back);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn g17_roundtrips_random_floats() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-30..30));
            let back: f64 = fmt_g17(x).parse().unwrap();
            assert_eq!(x, back, "{x} did not roundtrip");
        }
    }

    #[test]
    fn network_file_cascade_and_closed_loop() {
        let dir = std::env::temp_dir().join("lqs_io_test_net");
        std::fs::create_dir_all(&dir).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p1 = synth::random_params(1, 1, 0, &mut rng);
        let p2 = synth::random_params(1, 1, 0, &mut rng);
        write_system_file(&dir.join("a.json"), &p1).unwrap();
        write_system_file(&dir.join("b.json"), &p2).unwrap();

        let net = serde_json::json!({
            "schema_version": 1,
            "cascade": [
                {"system": "a.json", "label": "a"},
                {"system": "b.json", "label": "b", "phase": 0.3}
            ]
        });
        let npath = dir.join("net.json");
        std::fs::write(&npath, net.to_string()).unwrap();
        match evaluate_network_file(&npath).unwrap() {
            NetworkResult::Cascade(node) => {
                assert_eq!(node.n(), 2);
                assert_eq!(node.m(), 1);
            }
            _ => panic!("expected cascade"),
        }

        let mut p3 = synth::random_params(1, 3, 0, &mut rng);
        let mut p4 = synth::random_params(1, 3, 0, &mut rng);
        // trivial scattering keeps the loop causal
        p3.s = crate::linalg::CMat::identity(3, 3);
        p4.s = crate::linalg::CMat::identity(3, 3);
        write_system_file(&dir.join("plant.json"), &p3).unwrap();
        write_system_file(&dir.join("ctrl.json"), &p4).unwrap();
        let net = serde_json::json!({
            "schema_version": 1,
            "closed_loop": {
                "plant": {"system": "plant.json", "label": "plant",
                          "input_partition": [1,1,1], "output_partition": [1,1,1]},
                "controller": {"system": "ctrl.json", "label": "ctrl",
                               "input_partition": [1,1,1], "output_partition": [1,1,1]}
            }
        });
        std::fs::write(&npath, net.to_string()).unwrap();
        match evaluate_network_file(&npath).unwrap() {
            NetworkResult::ClosedLoop(cl) => {
                assert_eq!(cl.a_cl.nrows(), 4);
            }
            _ => panic!("expected closed loop"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
