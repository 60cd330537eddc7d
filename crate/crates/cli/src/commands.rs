use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use scldpcl::de::{helper_transfer, q_of, DeConfig, Direction, QValue, TransferValue, DEFAULT_Q_CAP};
use scldpcl::markov::{
    anti_termination_closed_form, q_values_for, ChannelDocument, ChannelModel, MarkovSetup, SbState,
    Side, SidedMode,
};
use scldpcl::protograph::{enumerate_symmetric_designs, is_symmetric_sb, SubBlockDocument, SubBlockProto};
use scldpcl::sb_analysis::{
    global_threshold, sb_thresholds_with, sg_limit_report, Eps2Grid, Eps2Method, SbThresholds,
    SgThresholdReport,
};

use crate::output::{emit, read, Cell, Format, RunManifest, Table};
use crate::{CliError, DirectionArg, MarkovMode, ReportFormat};

pub fn load_protograph(path: &Path) -> Result<SubBlockProto, CliError> {
    let doc: SubBlockDocument = serde_json::from_str(&read(path)?).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(doc.into_sub_block()?)
}

pub fn load_channel(path: &Path) -> Result<ChannelModel, CliError> {
    let doc: ChannelDocument = serde_json::from_str(&read(path)?).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(doc.into_model()?)
}

fn eps2_method(grid: Option<usize>) -> Eps2Method {
    grid.map_or(Eps2Method::Orbit, |n| Eps2Method::Grid(Eps2Grid(n)))
}

fn record_config(m: &mut RunManifest, cfg: &DeConfig) {
    m.set("tol", format!("{:e}", cfg.bisect_width));
    m.set("max_iters", cfg.max_iters);
    m.set("stall_tol", format!("{:e}", cfg.stall_tol));
    m.set("zero_tol", format!("{:e}", cfg.zero_tol));
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::LeftHelper => "left",
        Direction::RightHelper => "right",
    }
}

pub fn d_c_text(d_c: &[usize]) -> String {
    d_c.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
}

pub struct AnalyzeArgs {
    pub protograph: PathBuf,
    pub direction: DirectionArg,
    pub q_at: Vec<f64>,
    pub grid: Option<usize>,
    pub cfg: DeConfig,
    pub format: ReportFormat,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct QReport {
    eps: f64,
    /// "inf" for an infinite q, absent below the local threshold.
    q: Option<String>,
    note: Option<&'static str>,
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    manifest: RunManifest,
    l: usize,
    r: usize,
    t: usize,
    d_c: Vec<usize>,
    j: Option<usize>,
    thresholds: SbThresholds,
    symmetric: bool,
    semi_global: Option<SemiGlobal>,
    q_at: Vec<QReport>,
}

#[derive(Debug, Serialize)]
struct SemiGlobal {
    esg_11: f64,
    esg_01: f64,
    esg_00: f64,
    limits_characterized_by_eps3: bool,
    equals_eps3: Option<bool>,
}

impl From<SgThresholdReport> for SemiGlobal {
    fn from(r: SgThresholdReport) -> Self {
        Self {
            esg_11: r.esg_11,
            esg_01: r.esg_01,
            esg_00: r.esg_00,
            limits_characterized_by_eps3: r.limit_rule_applies,
            equals_eps3: r.limit_rule_holds,
        }
    }
}

fn q_report(sb: &SubBlockProto, dir: Direction, th: &SbThresholds, eps: f64, cfg: &DeConfig) -> Result<QReport, CliError> {
    if eps < th.eps1 {
        return Ok(QReport {
            eps,
            q: None,
            note: Some("locally decodable (eps < eps1)"),
        });
    }
    let q = q_of(sb, dir, eps, cfg, DEFAULT_Q_CAP)?;
    let note = (q == QValue::Infinite).then_some("no erasure reduction down to zero");
    Ok(QReport {
        eps,
        q: Some(q.to_string()),
        note,
    })
}

pub fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let sb = load_protograph(&a.protograph)?;
    let dir: Direction = a.direction.into();
    let mut manifest = RunManifest::new("analyze", &[&a.protograph], a.output.as_deref());
    manifest.set("direction", direction_name(dir));
    manifest.set("eps2_method", a.grid.map_or("orbit".to_string(), |n| format!("grid{n}")));
    record_config(&mut manifest, &a.cfg);

    let th = sb_thresholds_with(&sb, dir, &a.cfg, eps2_method(a.grid))?;
    let symmetric = is_symmetric_sb(&sb)?.is_some();
    let semi_global = if symmetric && sb.t() > 0 {
        Some(SemiGlobal::from(sg_limit_report(&sb, &a.cfg)?))
    } else {
        None
    };
    let q_at = a
        .q_at
        .iter()
        .map(|&e| q_report(&sb, dir, &th, e, &a.cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let label = sb.design_label();
    let report = AnalyzeReport {
        manifest,
        l: sb.l(),
        r: sb.r(),
        t: sb.t(),
        d_c: label.d_c,
        j: label.j,
        thresholds: th,
        symmetric,
        semi_global,
        q_at,
    };
    let text = match a.format {
        ReportFormat::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        ReportFormat::Text => render_report(&report),
    };
    emit(a.output.as_deref(), &text)
}

fn render_report(r: &AnalyzeReport) -> String {
    let mut s = r.manifest.header();
    let yes_no = |b: bool| if b { "yes" } else { "no" };
    let j = r.j.map_or("-".to_string(), |j| j.to_string());
    let _ = writeln!(s, "design     l={} r={} t={} d_C=({}) j={j}", r.l, r.r, r.t, d_c_text(&r.d_c));
    let _ = writeln!(s, "direction  {}", direction_name(r.thresholds.direction));
    let th = &r.thresholds;
    for (name, v) in [
        ("eps1", th.eps1),
        ("eps2", th.eps2),
        ("eps3", th.eps3),
        ("eps4", th.eps4),
        ("eps_lr", th.eps_lr),
    ] {
        let _ = writeln!(s, "{name:<10} {v:.6}");
    }
    let _ = writeln!(s, "symmetric  {}", yes_no(r.symmetric));
    if let Some(sg) = &r.semi_global {
        let _ = writeln!(s, "sg(1,1)    {:.6}", sg.esg_11);
        let _ = writeln!(s, "sg(0,1)    {:.6}", sg.esg_01);
        let _ = writeln!(s, "sg(0,0)    {:.6}", sg.esg_00);
        let verdict = match sg.equals_eps3 {
            None => "not applicable".to_string(),
            Some(h) => format!("sg(0,0) = sg(0,1) = eps3: {}", yes_no(h)),
        };
        let _ = writeln!(s, "sg limit   {verdict}");
    }
    for q in &r.q_at {
        let value = q.q.as_deref().unwrap_or("-");
        match q.note {
            Some(n) => {
                let _ = writeln!(s, "q({})  {value}  {n}", q.eps);
            }
            None => {
                let _ = writeln!(s, "q({})  {value}", q.eps);
            }
        }
    }
    s
}

pub struct SweepArgs {
    pub protograph: PathBuf,
    pub eps: Vec<f64>,
    pub points: usize,
    pub direction: DirectionArg,
    pub cfg: DeConfig,
    pub format: Format,
    pub output: Option<PathBuf>,
}

/// Every point of the `points`^t grid over [0,1]^t, first coordinate fastest.
fn sweep_grid(t: usize, points: usize) -> Vec<Vec<f64>> {
    let total = points.pow(t as u32);
    let step = 1.0 / (points - 1) as f64;
    (0..total)
        .map(|mut k| {
            (0..t)
                .map(|_| {
                    let v = (k % points) as f64 * step;
                    k /= points;
                    v
                })
                .collect()
        })
        .collect()
}

pub fn transfer_table(
    sb: &SubBlockProto,
    dir: Direction,
    eps: &[f64],
    points: usize,
    cfg: &DeConfig,
) -> Result<Table, CliError> {
    let t = sb.t();
    if t == 0 {
        return Err(CliError::Usage("an uncoupled sub-block has no transfer function".into()));
    }
    if points < 2 {
        return Err(CliError::Usage("the sweep needs at least 2 points".into()));
    }
    let mut cols = vec!["eps".to_string()];
    let name = |base: &str, i: usize| if t == 1 { base.to_string() } else { format!("{base}_{}", i + 1) };
    cols.extend((0..t).map(|i| name("delta", i)));
    cols.extend((0..t).map(|i| name("Delta", i)));
    let mut table = Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>());
    let grid = sweep_grid(t, points);
    for &e in eps {
        for d in &grid {
            let out = helper_transfer(sb, dir, e, &TransferValue(d.clone()), cfg)?;
            let mut row = vec![Cell::Num(e)];
            row.extend(d.iter().map(|&v| Cell::Num(v)));
            row.extend(out.0.iter().map(|&v| Cell::Num(v)));
            table.push(row);
        }
    }
    Ok(table)
}

pub fn transfer_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let sb = load_protograph(&a.protograph)?;
    let dir: Direction = a.direction.into();
    let table = transfer_table(&sb, dir, &a.eps, a.points, &a.cfg)?;
    let mut manifest = RunManifest::new("transfer-sweep", &[&a.protograph], a.output.as_deref());
    manifest.set("direction", direction_name(dir));
    manifest.set("eps", a.eps.iter().map(f64::to_string).collect::<Vec<_>>().join(";"));
    manifest.set("points", a.points);
    record_config(&mut manifest, &a.cfg);
    emit(a.output.as_deref(), &a.format.render(&table, &manifest))
}

pub struct DesignArgs {
    pub l: usize,
    pub r: usize,
    pub t_max: usize,
    pub m: usize,
    pub eps0: f64,
    pub min_overlap: Option<usize>,
    pub grid: Option<usize>,
    pub cfg: DeConfig,
    pub format: Format,
    pub output: Option<PathBuf>,
}

pub struct DesignRowResult {
    pub sb: SubBlockProto,
    pub thresholds: SbThresholds,
    pub eps_g: f64,
    pub q: QValue,
}

pub fn evaluate_design(sb: SubBlockProto, m: usize, eps0: f64, method: Eps2Method, cfg: &DeConfig) -> Result<DesignRowResult, CliError> {
    let dir = Direction::LeftHelper;
    let thresholds = sb_thresholds_with(&sb, dir, cfg, method)?;
    let eps_g = global_threshold(&sb, m, cfg)?;
    let q = q_of(&sb, dir, eps0, cfg, DEFAULT_Q_CAP)?;
    Ok(DesignRowResult {
        sb,
        thresholds,
        eps_g,
        q,
    })
}

pub fn design_cells(r: &DesignRowResult) -> Vec<Cell> {
    let label = r.sb.design_label();
    vec![
        label.t.into(),
        d_c_text(&label.d_c).into(),
        label.j.into(),
        r.thresholds.eps1.into(),
        r.thresholds.eps2.into(),
        r.thresholds.eps3.into(),
        r.eps_g.into(),
        r.q.into(),
    ]
}

pub const DESIGN_COLUMNS: [&str; 8] = ["t", "d_c", "j", "eps1", "eps2", "eps3", "eps_g", "q"];

pub fn design_search(a: &DesignArgs) -> Result<(), CliError> {
    if a.t_max > 2 {
        return Err(CliError::Usage(format!("t-max must be at most 2, got {}", a.t_max)));
    }
    let mut manifest = RunManifest::new("design-search", &[], a.output.as_deref());
    manifest.set("l", a.l);
    manifest.set("r", a.r);
    manifest.set("t_max", a.t_max);
    manifest.set("M", a.m);
    manifest.set("eps0", a.eps0);
    if let Some(o) = a.min_overlap {
        manifest.set("min_overlap", o);
    }
    manifest.set("eps2_method", a.grid.map_or("orbit".to_string(), |n| format!("grid{n}")));
    record_config(&mut manifest, &a.cfg);

    let mut table = Table::new(&DESIGN_COLUMNS);
    for t in 0..=a.t_max {
        for sb in enumerate_symmetric_designs(a.l, a.r, t)? {
            let keep = match (a.min_overlap, sb.coupling_overlap()) {
                (Some(min), Some(o)) if sb.t() >= 2 => o >= min,
                _ => true,
            };
            if keep {
                let row = evaluate_design(sb, a.m, a.eps0, eps2_method(a.grid), &a.cfg)?;
                table.push(design_cells(&row));
            }
        }
    }
    emit(a.output.as_deref(), &a.format.render(&table, &manifest))
}

pub struct MarkovArgs {
    pub protograph: PathBuf,
    pub channel: PathBuf,
    pub d_min: usize,
    pub d_max: usize,
    pub d_step: usize,
    pub mode: MarkovMode,
    pub q: Option<usize>,
    pub direction: DirectionArg,
    pub cfg: DeConfig,
    pub format: Format,
    pub output: Option<PathBuf>,
}

/// Builds the decoder chains, optionally replacing q of every
/// error-reducing state by `q_override`.
pub fn markov_setup(
    sb: &SubBlockProto,
    model: &ChannelModel,
    dir: Direction,
    cfg: &DeConfig,
    q_override: Option<usize>,
) -> Result<MarkovSetup, CliError> {
    let th = sb_thresholds_with(sb, dir, cfg, Eps2Method::Orbit)?;
    let mut q_values = q_values_for(model, sb, dir, cfg)?;
    if let Some(q) = q_override {
        for (qv, &e) in q_values.iter_mut().zip(model.states()) {
            if SbState::classify(e, &th) == SbState::S2 {
                *qv = QValue::Finite(q);
            }
        }
    }
    Ok(MarkovSetup::from_parts(model, th, q_values)?)
}

/// alpha of a symmetric two-state chain whose good state reduces erasures and
/// whose bad state is anti-terminating; there the bounds have a closed form.
pub fn closed_form_alpha(model: &ChannelModel, setup: &MarkovSetup) -> Option<f64> {
    let p = model.p();
    let symmetric = model.states().len() == 2 && (p[(0, 0)] - p[(1, 1)]).abs() < 1e-15;
    let a = &setup.map.a_sets;
    (symmetric && a[1] == [0] && a[3] == [1]).then(|| p[(0, 0)])
}

pub fn markov(a: &MarkovArgs) -> Result<(), CliError> {
    if a.d_step == 0 || a.d_min > a.d_max {
        return Err(CliError::Usage("need d-step >= 1 and d-min <= d-max".into()));
    }
    let two_sided = a.mode != MarkovMode::OneSided;
    let ds: Vec<usize> = (a.d_min..=a.d_max).step_by(a.d_step).collect();
    if two_sided {
        if let Some(d) = ds.iter().find(|&&d| d % 2 == 1) {
            return Err(CliError::Usage(format!(
                "two-sided decoding needs an even number of helpers, got d={d} (use --mode one-sided)"
            )));
        }
    }
    let sb = load_protograph(&a.protograph)?;
    let model = load_channel(&a.channel)?;
    let dir: Direction = a.direction.into();
    let setup = markov_setup(&sb, &model, dir, &a.cfg, a.q)?;
    let closed = closed_form_alpha(&model, &setup);

    let mut manifest = RunManifest::new("markov", &[&a.protograph, &a.channel], a.output.as_deref());
    manifest.set("direction", direction_name(dir));
    manifest.set("d", format!("{}..{}step{}", a.d_min, a.d_max, a.d_step));
    manifest.set("q", setup.map.q);
    if a.q.is_some() {
        manifest.set("q_source", "override");
    }
    let sets: Vec<String> = setup
        .map
        .a_sets
        .iter()
        .map(|s| s.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(";"))
        .collect();
    manifest.set("state_sets", format!("[{}]", sets.join("|")));
    manifest.set("evaluation", if closed.is_some() { "closed-form" } else { "markov-chain" });
    record_config(&mut manifest, &a.cfg);

    let mut table = Table::new(&["d", "p_one_sided_L", "p_one_sided_R", "p_two_sided"]);
    let q = setup.map.q;
    for d in ds {
        let (left, right) = match (a.mode == MarkovMode::TwoSided, closed) {
            (true, _) => (Cell::Empty, Cell::Empty),
            (false, Some(alpha)) => {
                let v = anti_termination_closed_form(alpha, q, d, SidedMode::OneSided);
                (v.into(), v.into())
            }
            (false, None) => (setup.one_sided(d, Side::Left).into(), setup.one_sided(d, Side::Right).into()),
        };
        let both = if !two_sided {
            Cell::Empty
        } else if let Some(alpha) = closed {
            anti_termination_closed_form(alpha, q, d, SidedMode::TwoSided).into()
        } else {
            setup.two_sided(d)?.into()
        };
        table.push(vec![d.into(), left, right, both]);
    }
    emit(a.output.as_deref(), &a.format.render(&table, &manifest))
}
