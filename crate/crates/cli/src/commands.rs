//! Command dispatch and report assembly.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use pencilph_core::dh::{self, DH_DEFECT_LIMIT};
use pencilph_core::geometry::{self, GeoStable};
use pencilph_core::numerics::ToleranceConfig;
use pencilph_core::oracle;
use pencilph_core::pencil::{self, DescriptorSystem, MatrixPencil};
use pencilph_core::stability::{self, StabilityClass};
use pencilph_core::stabilize::{self, PhDescriptor};
use pencilph_core::subspace::Subspace;
use pencilph_core::{DissipativeStructure, Error, LagrangianStructure};
use serde_json::{Map, Value};

use crate::problem::{matrix_to_json, number_to_json, Kind, ProblemFile};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    RecastDh,
    Stabilize,
    RecastPh,
    Geometry,
    Simulate,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Analyze, Command::RecastDh, Command::Stabilize, Command::RecastPh, Command::Geometry, Command::Simulate];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::RecastDh => "recast-dh",
            Command::Stabilize => "stabilize",
            Command::RecastPh => "recast-ph",
            Command::Geometry => "geometry",
            Command::Simulate => "simulate",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn accepts(self, kind: Kind) -> bool {
        use Kind::*;
        match self {
            Command::Analyze => true,
            Command::RecastDh => matches!(kind, Pencil | Descriptor | Dh),
            Command::Stabilize | Command::RecastPh => matches!(kind, Descriptor | Ph),
            Command::Geometry => matches!(kind, Dh | Ph | Geometry),
            Command::Simulate => matches!(kind, Pencil | Descriptor | Dh | Ph),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Success,
    Negative,
    Inconclusive,
    Error,
    Usage,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Error => 1,
            Status::Negative => 2,
            Status::Inconclusive => 3,
            Status::Usage => 64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Success => "success",
            Status::Negative => "negative",
            Status::Inconclusive => "inconclusive",
            Status::Error => "error",
            Status::Usage => "usage_error",
        }
    }

    fn of_error(e: &Error) -> Status {
        match e {
            Error::NotStable(_)
            | Error::SingularPencil
            | Error::NotControllable(_)
            | Error::ImagJordanBlock { .. }
            | Error::NotDissipative(_) => Status::Negative,
            Error::IllConditioned(_) | Error::NotNonnegative(_) => Status::Inconclusive,
            _ => Status::Error,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Flags {
    pub atol: Option<f64>,
    pub rtol: Option<f64>,
    pub horizon: f64,
    pub samples: usize,
}

impl Default for Flags {
    fn default() -> Self {
        Flags { atol: None, rtol: None, horizon: 10.0, samples: 201 }
    }
}

/// Flag, then environment (`atol` only), then problem file, then defaults.
pub fn resolve_tolerances(flags: &Flags, env_atol: Option<f64>, problem: &ProblemFile) -> pencilph_core::Result<ToleranceConfig> {
    let d = ToleranceConfig::default();
    let file = problem.tolerances.as_ref();
    let atol = flags.atol.or(env_atol).or(file.and_then(|t| t.atol)).unwrap_or(d.atol);
    let rtol = flags.rtol.or(file.and_then(|t| t.rtol)).unwrap_or(d.rtol);
    ToleranceConfig::new(atol, rtol)
}

#[derive(Debug, Clone)]
pub struct Report {
    pub status: Status,
    pub json: Value,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn to_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.json).expect("serializable") + "\n"
    }
}

/// Collected report content.
#[derive(Default)]
struct Body {
    verdict: Map<String, Value>,
    matrices: Map<String, Value>,
    residuals: Map<String, Value>,
}

impl Body {
    fn verdict(&mut self, k: &str, v: impl Into<Value>) {
        self.verdict.insert(k.to_string(), v.into());
    }

    fn matrix(&mut self, k: &str, m: &DMatrix<f64>) {
        self.matrices.insert(k.to_string(), matrix_to_json(m));
    }

    fn residual(&mut self, k: &str, v: f64) {
        self.residuals.insert(k.to_string(), number_to_json(v));
    }

    fn residual_map(&mut self, prefix: &str, m: &BTreeMap<String, f64>) {
        for (k, v) in m {
            self.residual(&format!("{prefix}{k}"), *v);
        }
    }
}

type Outcome = Result<Status, Error>;

pub fn run_command(cmd: Command, problem: &ProblemFile, source: &str, flags: &Flags, tol: &ToleranceConfig) -> Report {
    let mut body = Body::default();
    let (status, error) = if !cmd.accepts(problem.kind) {
        (Status::Usage, Some(format!("command {cmd} does not accept problems of kind {}", problem.kind)))
    } else {
        let r = match cmd {
            Command::Analyze => analyze(problem, tol, &mut body),
            Command::RecastDh => recast_dh(problem, tol, &mut body),
            Command::Stabilize => stabilize_cmd(problem, tol, &mut body, false),
            Command::RecastPh => stabilize_cmd(problem, tol, &mut body, true),
            Command::Geometry => geometry_cmd(problem, tol, &mut body),
            Command::Simulate => simulate_cmd(problem, flags, tol, &mut body),
        };
        match r {
            Ok(s) => (s, None),
            Err(e) => (Status::of_error(&e), Some(e.to_string())),
        }
    };
    let mut obj = Map::new();
    obj.insert("command".into(), cmd.as_str().into());
    obj.insert("kind".into(), problem.kind.as_str().into());
    obj.insert("source".into(), source.into());
    obj.insert("version".into(), VERSION.into());
    let mut t = Map::new();
    t.insert("atol".into(), number_to_json(tol.atol));
    t.insert("rtol".into(), number_to_json(tol.rtol));
    obj.insert("tolerances".into(), Value::Object(t));
    obj.insert("status".into(), status.as_str().into());
    obj.insert("exit_code".into(), status.exit_code().into());
    obj.insert("error".into(), error.map_or(Value::Null, Value::from));
    obj.insert("verdict".into(), Value::Object(body.verdict));
    obj.insert("matrices".into(), Value::Object(body.matrices));
    obj.insert("residuals".into(), Value::Object(body.residuals));
    Report { status, json: Value::Object(obj) }
}

/// Error report for files that could not be parsed.
pub fn error_report(cmd: Command, source: &str, message: &str, status: Status) -> Report {
    let mut obj = Map::new();
    obj.insert("command".into(), cmd.as_str().into());
    obj.insert("kind".into(), Value::Null);
    obj.insert("source".into(), source.into());
    obj.insert("version".into(), VERSION.into());
    obj.insert("tolerances".into(), Value::Null);
    obj.insert("status".into(), status.as_str().into());
    obj.insert("exit_code".into(), status.exit_code().into());
    obj.insert("error".into(), message.into());
    for k in ["verdict", "matrices", "residuals"] {
        obj.insert(k.into(), Value::Object(Map::new()));
    }
    Report { status, json: Value::Object(obj) }
}

fn dh_a(p: &ProblemFile) -> DMatrix<f64> {
    (p.matrix("J") - p.matrix("R")) * p.matrix("Q")
}

fn pencil_of(p: &ProblemFile, tol: &ToleranceConfig) -> pencilph_core::Result<MatrixPencil> {
    match p.kind {
        Kind::Pencil | Kind::Descriptor => MatrixPencil::new(p.matrix("E").clone(), p.matrix("A").clone()),
        Kind::Dh | Kind::Ph => MatrixPencil::new(p.matrix("E").clone(), dh_a(p)),
        Kind::Geometry => {
            let (d, l) = structures(p, tol)?;
            geometry::compose_dl(&d, &l, tol)
        }
    }
}

fn descriptor_of(p: &ProblemFile) -> pencilph_core::Result<DescriptorSystem> {
    match p.kind {
        Kind::Ph => DescriptorSystem::new(p.matrix("E").clone(), dh_a(p), p.matrix("B") - p.matrix("P")),
        _ => DescriptorSystem::new(p.matrix("E").clone(), p.matrix("A").clone(), p.matrix("B").clone()),
    }
}

fn ph_of(p: &ProblemFile, tol: &ToleranceConfig) -> pencilph_core::Result<PhDescriptor> {
    let pen = MatrixPencil::new(p.matrix("E").clone(), dh_a(p))?;
    let n = pen.n();
    let system_space = pencil::system_space(&pen, tol).unwrap_or_else(|_| Subspace::full(n));
    Ok(PhDescriptor {
        e: p.matrix("E").clone(),
        j: p.matrix("J").clone(),
        r: p.matrix("R").clone(),
        q: p.matrix("Q").clone(),
        b: p.matrix("B").clone(),
        p: p.matrix("P").clone(),
        sff: p.matrix("S").clone(),
        nff: p.matrix("N").clone(),
        system_space,
        residuals: BTreeMap::new(),
    })
}

fn structures(p: &ProblemFile, tol: &ToleranceConfig) -> pencilph_core::Result<(DissipativeStructure, LagrangianStructure)> {
    match p.kind {
        Kind::Geometry => Ok((
            DissipativeStructure::new(p.matrix("D1").clone(), p.matrix("D2").clone())?,
            LagrangianStructure::new(p.matrix("L1").clone(), p.matrix("L2").clone())?,
        )),
        Kind::Dh => geometry::from_dh(p.matrix("E"), p.matrix("J"), p.matrix("R"), p.matrix("Q"), tol),
        Kind::Ph => geometry::embed_ph(&ph_of(p, tol)?, tol),
        _ => Err(Error::InvalidInput(format!("no geometric structures for kind {}", p.kind))),
    }
}

fn class_status(c: StabilityClass) -> Status {
    if c.is_stable() {
        Status::Success
    } else {
        Status::Negative
    }
}

fn spectrum_json(entries: &[pencilph_core::SpectrumEntry]) -> Value {
    Value::Array(
        entries
            .iter()
            .map(|e| {
                let mut o = Map::new();
                o.insert("re".into(), number_to_json(e.value.re));
                o.insert("im".into(), number_to_json(e.value.im));
                o.insert("algebraic".into(), e.algebraic.into());
                o.insert("geometric".into(), e.geometric.into());
                o.insert("semi_simple".into(), e.semi_simple.into());
                Value::Object(o)
            })
            .collect(),
    )
}

fn sizes(v: &[usize]) -> Value {
    Value::Array(v.iter().map(|&x| x.into()).collect())
}

fn analyze(p: &ProblemFile, tol: &ToleranceConfig, b: &mut Body) -> Outcome {
    let pen = pencil_of(p, tol)?;
    let qkf = pencil::quasi_kronecker(&pen, tol)?;
    let v = stability::check_stability(&pen, tol)?;
    let regular = v.classification != StabilityClass::Singular;
    b.verdict("regular", regular);
    b.verdict("index", if regular { Value::from(qkf.index()) } else { Value::Null });
    b.verdict("n0", qkf.n0);
    b.verdict("alpha", sizes(&qkf.alpha));
    b.verdict("beta", sizes(&qkf.beta));
    b.verdict("gamma", sizes(&qkf.gamma));
    b.verdict("classification", v.classification.as_str());
    b.verdict("reason", v.reason.clone());
    b.verdict("spectrum", spectrum_json(&v.spectrum));
    b.verdict("warnings", Value::Array(qkf.warnings.iter().map(|w| Value::from(w.clone())).collect()));
    b.residual("kronecker_residual", qkf.residual);
    b.residual("kronecker_residual_bound", qkf.residual_bound);
    if p.kind == Kind::Geometry {
        b.matrix("E", pen.e());
        b.matrix("A", pen.a());
    }
    let mut status = class_status(v.classification);
    if p.kind == Kind::Dh {
        let val = dh::validate_dh(p.matrix("E"), p.matrix("J"), p.matrix("R"), p.matrix("Q"), tol)?;
        let chk = dh::dh_stability_check(p.matrix("E"), p.matrix("J"), p.matrix("R"), p.matrix("Q"), tol)?;
        let mut o = Map::new();
        o.insert("valid".into(), val.valid.into());
        o.insert("kernel_condition".into(), val.kernel_condition.into());
        o.insert("stable".into(), chk.stable.as_str().into());
        o.insert("via_clause".into(), chk.via_clause.clone().into());
        b.verdict("dh", Value::Object(o));
        b.residual("dh_j_skew", val.j_skew_defect);
        b.residual("dh_r_psd", val.r_psd_defect);
        b.residual("dh_qte_sym", val.qte_sym_defect);
        b.residual("dh_qte_psd", val.qte_psd_defect);
        b.residual("dh_kernel", val.kernel_defect);
    }
    if v.classification.is_stable() {
        let strict = v.classification == StabilityClass::AsymptoticallyStable;
        match stability::solve_lyapunov_inequality(&pen, strict, tol) {
            Ok(c) => {
                b.verdict("certificate", if strict { "strict" } else { "nonstrict" });
                b.matrix("X", &c.x);
                b.residual("lyap_residual", c.residual_lyap);
                b.residual("lyap_residual_bound", c.residual_bound);
                b.residual("lyap_max_eig", c.lyap_max_eig);
                b.residual("pd_margin", c.pd_margin);
                b.residual("invariance_defect", c.invariance_defect);
            }
            Err(e) => {
                b.verdict("certificate", Value::Null);
                b.verdict("certificate_error", e.to_string());
                status = Status::Inconclusive;
            }
        }
    }
    Ok(status)
}

fn recast_dh(p: &ProblemFile, tol: &ToleranceConfig, b: &mut Body) -> Outcome {
    let pen = pencil_of(p, tol)?;
    let v = stability::check_stability(&pen, tol)?;
    b.verdict("classification", v.classification.as_str());
    if !v.classification.is_stable() {
        b.verdict("recast", false);
        return Ok(Status::Negative);
    }
    let f = dh::recast_dh(&pen, tol)?;
    b.matrix("J", &f.j);
    b.matrix("R", &f.r);
    b.matrix("Q", &f.q);
    b.residual_map("", &f.residuals);
    let holds = f.holds(DH_DEFECT_LIMIT);
    b.verdict("recast", holds);
    let idx = pencil::index_of(&pen, tol)?;
    b.verdict("index", idx);
    if idx <= 1 {
        match dh::recast_dh_index1(&pen, tol) {
            Ok(g) => {
                b.matrix("index1_J", &g.j);
                b.matrix("index1_R", &g.r);
                b.matrix("index1_Q", &g.q);
                b.residual_map("index1_", &g.residuals);
                b.verdict("index1_recast", g.holds(1e-8));
            }
            Err(e) => b.verdict("index1_error", e.to_string()),
        }
    }
    Ok(if holds { Status::Success } else { Status::Inconclusive })
}

fn stabilize_cmd(p: &ProblemFile, tol: &ToleranceConfig, b: &mut Body, with_ph: bool) -> Outcome {
    let d = descriptor_of(p)?;
    let c = match stabilize::build_certificates(&d, tol) {
        Ok(c) => c,
        Err(e @ Error::NotControllable(_)) => {
            b.verdict("stabilizable", false);
            b.verdict("reason", e.to_string());
            return Ok(Status::Negative);
        }
        Err(e) => return Err(e),
    };
    b.verdict("stabilizable", true);
    let rd = &c.decomposition;
    b.verdict("n1", rd.n1);
    b.verdict("n2", rd.n2);
    b.verdict("alpha", sizes(&rd.alpha));
    b.matrix("X1", &c.x1);
    b.matrix("X2", &c.x2);
    b.matrix("P1", &c.p1);
    b.matrix("P1_certificate", &c.p1_certificate);
    b.matrix("P2", &c.p2);
    b.matrix("K", &c.k);
    b.residual_map("", &c.residuals);
    b.residual("decomposition", rd.residual);
    let closed = MatrixPencil::new(d.e().clone(), d.a() + d.b() * &c.k)?;
    let cl = stability::check_stability(&closed, tol)?;
    b.verdict("closed_loop", cl.classification.as_str());
    b.verdict("certificates_hold", c.holds());
    let mut ok = c.holds() && cl.classification.is_stable();
    if with_ph {
        let ph = stabilize::recast_ph(&d, &c, tol)?;
        b.matrix("J", &ph.j);
        b.matrix("R", &ph.r);
        b.matrix("Q", &ph.q);
        b.matrix("B", &ph.b);
        b.matrix("P", &ph.p);
        b.matrix("S", &ph.sff);
        b.matrix("N", &ph.nff);
        b.residual_map("ph_", &ph.residuals);
        let inter = stabilize::zero_output_interconnection(&ph, &d)?;
        b.matrix("A_zero_output", inter.a());
        ok &= ph.residuals.values().all(|&v| v <= 1e-7);
    }
    Ok(if ok { Status::Success } else { Status::Inconclusive })
}

fn geometry_cmd(p: &ProblemFile, tol: &ToleranceConfig, b: &mut Body) -> Outcome {
    let (d, l) = structures(p, tol)?;
    let rep = geometry::validate_structures(&l, &d, tol)?;
    b.verdict("is_lagrangian", rep.is_lagrangian);
    b.verdict("nonnegative", rep.nonnegative);
    b.verdict("is_dissipative", rep.is_dissipative);
    b.verdict("is_dirac", rep.is_dirac);
    b.residual("lagrangian_symmetry", rep.lagrangian_symmetry_defect);
    b.residual("nonnegativity", rep.nonnegativity_defect);
    b.residual("dissipativity_max_eig", rep.dissipativity_max_eig);
    if !(rep.is_lagrangian && rep.is_dissipative) {
        return Ok(Status::Negative);
    }
    let (ln, dn) = geometry::normalize_structures(&l, &d, tol)?;
    b.matrix("L1", &ln.l1);
    b.matrix("L2", &ln.l2);
    b.matrix("D1", &dn.d1);
    b.matrix("D2", &dn.d2);
    let pen = geometry::compose_dl(&d, &l, tol)?;
    b.matrix("E", pen.e());
    b.matrix("A", pen.a());
    if !rep.nonnegative {
        b.verdict("stable", "not_applicable");
        return Ok(Status::Inconclusive);
    }
    let g = geometry::geometric_stability_check(&d, &l, tol)?;
    b.verdict("regular", g.regular);
    b.verdict("stable", g.stable.as_str());
    b.verdict(
        "conditions",
        Value::Object(g.conditions.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect()),
    );
    b.verdict("fallback", g.fallback.map_or(Value::Null, |c| c.as_str().into()));
    Ok(match (g.regular, g.stable, g.fallback) {
        (false, _, _) => Status::Negative,
        (true, GeoStable::Yes, _) => Status::Success,
        (true, _, Some(c)) => class_status(c),
        _ => Status::Inconclusive,
    })
}

/// Projection of the all-ones vector onto the system space (first basis vector if that vanishes).
fn default_x0(pen: &MatrixPencil, tol: &ToleranceConfig) -> pencilph_core::Result<DVector<f64>> {
    let v = pencil::system_space(pen, tol)?;
    let n = pen.n();
    if v.dim() == 0 {
        return Ok(DVector::zeros(n));
    }
    let basis = v.basis();
    let x = basis * (basis.transpose() * DVector::from_element(n, 1.0));
    Ok(if x.norm() > 1e-8 * (n as f64).sqrt() { x } else { basis.column(0).into_owned() })
}

fn simulate_cmd(p: &ProblemFile, flags: &Flags, tol: &ToleranceConfig, b: &mut Body) -> Outcome {
    let pen = pencil_of(p, tol)?;
    if !pencil::is_regular(&pen, tol)? {
        return Err(Error::SingularPencil);
    }
    let x0 = match &p.x0 {
        Some(x) => DVector::from_vec(x.clone()),
        None => default_x0(&pen, tol)?,
    };
    let tr = oracle::simulate(&pen, &x0, flags.horizon, flags.samples, tol)?;
    b.verdict("horizon", number_to_json(flags.horizon));
    b.verdict("samples", flags.samples);
    b.verdict("x0", Value::Array(x0.iter().map(|&x| number_to_json(x)).collect()));
    b.verdict("times", Value::Array(tr.times.iter().map(|&t| number_to_json(t)).collect()));
    let states = DMatrix::from_fn(tr.states.len(), pen.n(), |i, j| tr.states[i][j]);
    b.matrix("states", &states);
    b.residual("sup_norm", tr.sup_norm());
    b.residual("final_norm", tr.final_norm());
    b.residual("dae_residual", oracle::residual_along(&tr, &pen));
    if matches!(p.kind, Kind::Dh | Kind::Ph) {
        let e = oracle::check_energy_decay(&tr, p.matrix("E"), p.matrix("Q"), 1e-6);
        b.verdict("energy_monotone", e.monotone);
        b.residual("energy_max_increase", e.max_increase);
    }
    Ok(Status::Success)
}
