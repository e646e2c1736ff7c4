//! One function per subcommand. Each validates all of its flags first and
//! only then computes and writes.

use anyhow::anyhow;
use rayon::prelude::*;
use serde_json::{json, Value};

use radial_blowup::asymptotics::{xyzw, RateWindow};
use radial_blowup::dynsys::{
    check_divergence, check_stability_zeta2, critical_shooting_value, equilibria, integrate_transformed_ball,
    EquilibriumReport,
};
use radial_blowup::figures::{figure_profiles, V_CLIP};
use radial_blowup::ko_criteria::KoJson;
use radial_blowup::radial::Domain;
use radial_blowup::{
    ball_rates, classify_ball, classify_whole_space, integrate, verify_ball_rates, verify_whole_space,
    whole_space_rates, Classification, Nonlinearity, RadialSolution, RateCheck, StepControls, VectorField3,
};

use crate::args::{
    check_prefix, controls, nonlinearity, usage, ClassifyArgs, DynsysArgs, FKind, FiguresArgs, Format, OutputArgs,
    SolveArgs, Usage, WholeSpaceArgs,
};
use crate::output::{emit, render_json, Numbers, Table};

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Usage(Usage),
    Compute(anyhow::Error),
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Self::Usage(u)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Compute(e)
    }
}

impl From<radial_blowup::Error> for Failure {
    fn from(e: radial_blowup::Error) -> Self {
        Self::Compute(e.into())
    }
}

pub type Outcome = Result<(), Failure>;

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types always serialize")
}

fn emit_json(out: &OutputArgs, value: &Value) -> Outcome {
    emit(
        out.out.as_deref(),
        ".json",
        &render_json(value, Numbers::new(out.round)),
    )?;
    Ok(())
}

fn emit_csv(out: &OutputArgs, suffix: &str, table: &Table) -> Outcome {
    emit(out.out.as_deref(), suffix, &table.render())?;
    Ok(())
}

fn whole_space_only(domain: Domain, what: &str) -> Result<(), Usage> {
    match domain {
        Domain::WholeSpace => Ok(()),
        Domain::Ball { .. } => usage(format!("{what} integrates on ℝᴺ up to blow-up; drop --R")),
    }
}

fn classification_json(nl: &Nonlinearity, p: f64, c: &Classification) -> Value {
    let mut v = to_value(&KoJson::new(nl, p, c));
    v["region"] = json!(c.verdict.region().map(String::from));
    v
}

pub fn classify(args: &ClassifyArgs) -> Outcome {
    check_prefix(&args.output.out)?;
    let ps = args.p.points();
    let grid: Vec<(f64, Nonlinearity)> = match (&args.f, &args.q) {
        (FKind::Power, Some(qs)) => {
            let mut g = Vec::new();
            for &p in &ps {
                for q in qs.points() {
                    g.push((p, nonlinearity(&FKind::Power, Some(q))?));
                }
            }
            g
        }
        (FKind::Power, None) => return usage("--f power needs --q"),
        (_, Some(_)) => return usage("--q only applies to --f power"),
        (f, None) => {
            let nl = nonlinearity(f, None)?;
            ps.iter().map(|&p| (p, nl.clone())).collect()
        }
    };
    let results: Vec<radial_blowup::Result<Classification>> = grid
        .par_iter()
        .map(|(p, nl)| {
            if args.whole_space {
                classify_whole_space(nl, *p)
            } else {
                classify_ball(nl, *p)
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    for ((p, nl), res) in grid.iter().zip(results) {
        let c = res.map_err(|e| anyhow!("p = {p}, f = {}: {e}", nl.label()))?;
        rows.push((*p, nl, c));
    }
    let numbers = Numbers::new(args.output.round);
    match args.output.format {
        Format::Json => {
            let items: Vec<Value> = rows.iter().map(|(p, nl, c)| classification_json(nl, *p, c)).collect();
            emit_json(&args.output, &Value::Array(items))
        }
        Format::Csv => {
            let mut t = Table::new(&[
                "p",
                "q",
                "plain",
                "weighted",
                "verdict",
                "region",
                "method",
                "tail_exponent",
            ]);
            for (p, nl, c) in &rows {
                t.rows.push(vec![
                    numbers.fmt(*p),
                    nl.power_exponent().map(|q| numbers.fmt(q)).unwrap_or_default(),
                    c.evidence.plain.to_string(),
                    c.evidence.weighted.to_string(),
                    c.verdict.to_string(),
                    c.verdict.region().map(String::from).unwrap_or_default(),
                    c.evidence.method.to_string(),
                    numbers.fmt(c.evidence.tail_exponent),
                ]);
            }
            emit_csv(&args.output, ".csv", &t)
        }
    }
}

fn solution_meta(sol: &RadialSolution) -> Value {
    let mut meta = to_value(&sol.meta());
    meta["fit"] = to_value(&sol.fit);
    meta
}

pub fn solve(args: &SolveArgs) -> Outcome {
    check_prefix(&args.output.out)?;
    let params = args.problem.params()?;
    let controls = args.problem.controls()?;
    let sol = integrate(&params, &controls)?;
    let numbers = Numbers::new(args.output.round);
    match args.output.format {
        Format::Json => {
            let samples: Vec<Value> = sol
                .samples
                .iter()
                .map(|s| json!({"r": s.r, "u": s.u, "w": s.w, "v": s.v, "psi": s.psi}))
                .collect();
            emit_json(&args.output, &json!({"meta": solution_meta(&sol), "samples": samples}))
        }
        Format::Csv => {
            let mut t = Table::new(&["r", "u", "w", "v", "psi"]);
            for s in &sol.samples {
                t.rows
                    .push([s.r, s.u, s.w, s.v, s.psi].iter().map(|x| numbers.fmt(*x)).collect());
            }
            emit_csv(&args.output, ".csv", &t)?;
            let meta = render_json(&solution_meta(&sol), numbers);
            match args.output.out.as_deref() {
                Some(prefix) => emit(Some(prefix), ".meta.json", &meta)?,
                None => eprint!("{meta}"),
            }
            Ok(())
        }
    }
}

fn checks_table(checks: &[RateCheck], numbers: Numbers) -> Table {
    let mut t = Table::new(&[
        "quantity",
        "empirical",
        "theoretical",
        "rel_err",
        "window_lo",
        "window_hi",
        "sensitivity",
    ]);
    for c in checks {
        t.rows.push(vec![
            c.quantity.clone(),
            numbers.fmt(c.empirical),
            numbers.fmt(c.theoretical),
            numbers.fmt(c.rel_err),
            numbers.fmt(c.window.0),
            numbers.fmt(c.window.1),
            c.sensitivity.map(|s| numbers.fmt(s)).unwrap_or_default(),
        ]);
    }
    t
}

struct BallRateRun {
    rates: radial_blowup::BallRates,
    r_max: Option<f64>,
    checks: Vec<RateCheck>,
}

impl BallRateRun {
    fn json(&self) -> Value {
        json!({"rates": to_value(&self.rates), "R_max": self.r_max, "checks": to_value(&self.checks)})
    }
}

fn ball_rate_run(sol: &RadialSolution, p: f64, q: f64) -> anyhow::Result<BallRateRun> {
    let rates = ball_rates(p, q)?;
    if sol.r_max().is_none() {
        return Err(anyhow!("the solution did not blow up ({})", sol.termination));
    }
    let checks = verify_ball_rates(sol, &rates, RateWindow::default())?;
    Ok(BallRateRun {
        rates,
        r_max: sol.r_max(),
        checks,
    })
}

pub fn rates(args: &SolveArgs) -> Outcome {
    check_prefix(&args.output.out)?;
    let params = args.problem.params()?;
    whole_space_only(params.domain, "rates")?;
    let controls = args.problem.controls()?;
    let (p, q) = args.problem.power_exponents()?;
    ball_rates(p, q).map_err(|e| Usage(e.to_string()))?;
    let sol = integrate(&params, &controls)?;
    let run = ball_rate_run(&sol, p, q)?;
    match args.output.format {
        Format::Json => emit_json(&args.output, &run.json()),
        Format::Csv => emit_csv(
            &args.output,
            ".csv",
            &checks_table(&run.checks, Numbers::new(args.output.round)),
        ),
    }
}

/// Smallest evaluation radius accepted by the whole-space comparison.
const MIN_R_EVAL: f64 = 1e3;

pub fn whole_space(args: &WholeSpaceArgs) -> Outcome {
    check_prefix(&args.output.out)?;
    let params = args.problem.params()?;
    whole_space_only(params.domain, "whole-space")?;
    let (p, q) = args.problem.power_exponents()?;
    let rates = whole_space_rates(p, q, args.problem.n).map_err(|e| Usage(e.to_string()))?;
    if !(args.r_eval.is_finite() && args.r_eval >= MIN_R_EVAL) {
        return usage(format!("--r-eval must be at least {MIN_R_EVAL}, got {}", args.r_eval));
    }
    let controls = StepControls {
        r_stop: StepControls::default().r_stop.max(10.0 * args.r_eval),
        ..args.problem.controls()?
    };
    let sol = integrate(&params, &controls)?;
    let checks = verify_whole_space(&sol, &rates, args.r_eval)?;
    let numbers = Numbers::new(args.output.round);
    match args.output.format {
        Format::Json => emit_json(
            &args.output,
            &json!({"rates": to_value(&rates), "r_eval": args.r_eval, "checks": to_value(&checks)}),
        )?,
        Format::Csv => emit_csv(&args.output, ".csv", &checks_table(&checks, numbers))?,
    }
    if let Some(prefix) = args.output.out.as_deref() {
        let mut t = Table::new(&["t", "X", "Y", "Z", "W"]);
        for s in &sol.samples {
            let mut row = vec![numbers.fmt(s.r.ln())];
            row.extend(xyzw(s, p, q).iter().map(|x| numbers.fmt(*x)));
            t.rows.push(row);
        }
        emit(Some(prefix), ".trajectory.csv", &t.render())?;
    }
    Ok(())
}

fn class_label(r: &EquilibriumReport) -> String {
    match to_value(&r.class) {
        Value::String(s) => s,
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| format!("{k}({})", v.get("dim_stable").unwrap_or(v)))
            .collect(),
        other => other.to_string(),
    }
}

fn equilibria_table(reports: &[EquilibriumReport], numbers: Numbers) -> Table {
    let mut t = Table::new(&[
        "X", "Y", "Z", "class", "re1", "im1", "re2", "im2", "re3", "im3", "residual",
    ]);
    for r in reports {
        let mut row: Vec<String> = r.point.iter().map(|x| numbers.fmt(*x)).collect();
        row.push(class_label(r));
        for (re, im) in &r.eigenvalues {
            row.push(numbers.fmt(*re));
            row.push(numbers.fmt(*im));
        }
        row.push(numbers.fmt(r.residual));
        t.rows.push(row);
    }
    t
}

/// Equilibria, divergence and (for `pq < 1` on ℝᴺ) the ζ₂ stability trace.
fn field_json(field: &VectorField3) -> anyhow::Result<(Vec<EquilibriumReport>, Value)> {
    let eq = equilibria(field);
    let mut v = json!({"field": to_value(field), "equilibria": to_value(&eq)});
    match *field {
        VectorField3::Ball { .. } => v["divergence"] = to_value(&check_divergence(field, None)),
        VectorField3::WholeSpace { p, q, n } => {
            if p * q < 1.0 {
                v["divergence"] = to_value(&check_divergence(field, None));
                v["zeta2"] = to_value(&check_stability_zeta2(p, q, n)?);
            }
        }
    }
    Ok((eq, v))
}

pub fn dynsys(args: &DynsysArgs) -> Outcome {
    check_prefix(&args.output.out)?;
    let field = if args.whole_space {
        VectorField3::whole_space(args.p, args.q, args.n)
    } else {
        VectorField3::ball(args.p, args.q)
    }
    .map_err(|e| Usage(e.to_string()))?;
    if args.whole_space && args.critical {
        return usage("--critical applies to the ball field only");
    }
    if args.n < 2 {
        return usage("--N must be at least 2");
    }
    if let Some(m) = args.m {
        if !(m.is_finite() && m > 0.0) {
            return usage(format!("--m must be positive, got {m}"));
        }
        if args.output.out.is_none() {
            return usage("--m writes a trajectory file; pass --out");
        }
    }
    if !(args.t_end.is_finite() && args.t_end > 0.0) {
        return usage(format!("--t-end must be positive, got {}", args.t_end));
    }
    let (eq, mut report) = field_json(&field)?;
    if args.critical {
        let b = ball_rates(args.p, args.q)?.b;
        report["critical_m"] = json!(critical_shooting_value(args.p, args.q, args.n)?);
        report["B"] = json!(b);
    }
    let numbers = Numbers::new(args.output.round);
    if let (Some(m), Some(prefix)) = (args.m, args.output.out.as_deref()) {
        let mut t;
        if args.whole_space {
            t = Table::new(&["t", "X", "Y", "Z", "W"]);
            let traj = radial_blowup::dynsys::integrate_transformed_whole_space(
                args.p,
                args.q,
                args.n,
                m,
                &StepControls::default(),
            )?;
            for (time, s) in traj.t.iter().zip(&traj.states) {
                let mut row = vec![numbers.fmt(*time)];
                row.extend(s.iter().map(|x| numbers.fmt(*x)));
                t.rows.push(row);
            }
        } else {
            t = Table::new(&["t", "X", "Y", "Z"]);
            let b = ball_rates(args.p, args.q)?.b;
            let traj = integrate_transformed_ball(args.p, args.q, args.n, m / b, args.t_end)?;
            for (time, s) in traj.t.iter().zip(&traj.states) {
                let mut row = vec![numbers.fmt(*time)];
                row.extend(s.iter().map(|x| numbers.fmt(*x)));
                t.rows.push(row);
            }
        }
        emit(Some(prefix), ".trajectory.csv", &t.render())?;
    }
    match args.output.format {
        Format::Json => emit_json(&args.output, &report),
        Format::Csv => emit_csv(&args.output, ".csv", &equilibria_table(&eq, numbers)),
    }
}

pub fn figures(args: &FiguresArgs) -> Outcome {
    let figure = args.figure()?;
    if args.output.format == Format::Json {
        return usage("figures are emitted as CSV curves only");
    }
    if args.dims.is_empty() || args.dims.iter().any(|&n| n < 2) {
        return usage("--N needs dimensions of at least 2");
    }
    if !(args.m.is_finite() && args.m > 0.0) {
        return usage(format!("--m must be positive, got {}", args.m));
    }
    let controls = controls(args.rtol, StepControls::default().v_ceiling)?;
    let prefix = args.output.out.clone().unwrap_or_else(|| figure.name().into());
    check_prefix(&Some(prefix.clone()))?;
    let profiles = args
        .dims
        .par_iter()
        .map(|&n| figure_profiles(figure, &[n], args.m, &controls).map(|mut v| v.remove(0)))
        .collect::<radial_blowup::Result<Vec<_>>>()?;
    let numbers = Numbers::new(args.output.round);
    for pr in &profiles {
        for (name, values) in [("u", &pr.u), ("v", &pr.v)] {
            let mut t = Table::new(&["r", name]);
            for (r, y) in pr.r.iter().zip(values.iter()) {
                let y = if name == "v" { y.min(V_CLIP) } else { *y };
                t.rows.push(vec![numbers.fmt(*r), numbers.fmt(y)]);
            }
            emit(Some(&prefix), &format!("_{name}_N{}.csv", pr.n), &t.render())?;
        }
    }
    Ok(())
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn section<F: FnOnce() -> anyhow::Result<Option<Value>>>(run: F, failed: &mut usize) -> Value {
    match run() {
        Ok(Some(mut v)) => {
            v["status"] = json!("ok");
            v
        }
        Ok(None) => json!({"status": "not_applicable"}),
        Err(e) => {
            *failed += 1;
            json!({"status": "failed", "error": format!("{e:#}")})
        }
    }
}

pub fn report(args: &SolveArgs) -> Outcome {
    check_prefix(&args.output.out)?;
    let params = args.problem.params()?;
    whole_space_only(params.domain, "report")?;
    let controls = args.problem.controls()?;
    let power = args.problem.power_exponents().ok();
    let (p, n) = (params.p, params.n);
    let mut failed = 0;

    let classification = section(
        || {
            let ball = classify_ball(&params.nl, p)?;
            let ws = classify_whole_space(&params.nl, p)?;
            Ok(Some(json!({
                "ball": classification_json(&params.nl, p, &ball),
                "whole_space": classification_json(&params.nl, p, &ws),
            })))
        },
        &mut failed,
    );

    let solved = integrate(&params, &controls);
    let solve = section(
        || match &solved {
            Ok(sol) => Ok(Some(solution_meta(sol))),
            Err(e) => Err(anyhow!("{e}")),
        },
        &mut failed,
    );

    let ball = section(
        || {
            let Some((p, q)) = power else { return Ok(None) };
            if ball_rates(p, q).is_err() {
                return Ok(None);
            }
            let sol = solved.as_ref().map_err(|e| anyhow!("{e}"))?;
            let run = ball_rate_run(sol, p, q)?;
            let (_, field) = field_json(&VectorField3::ball(p, q)?)?;
            let mut v = run.json();
            v["field"] = field;
            Ok(Some(v))
        },
        &mut failed,
    );

    let whole = section(
        || {
            let Some((p, q)) = power else { return Ok(None) };
            let Ok(rates) = whole_space_rates(p, q, n) else {
                return Ok(None);
            };
            let sol = solved.as_ref().map_err(|e| anyhow!("{e}"))?;
            let r_eval = 1e5;
            let checks = verify_whole_space(sol, &rates, r_eval)?;
            let (_, field) = field_json(&VectorField3::whole_space(p, q, n)?)?;
            Ok(Some(json!({
                "rates": to_value(&rates),
                "r_eval": r_eval,
                "checks": to_value(&checks),
                "field": field,
            })))
        },
        &mut failed,
    );

    let doc = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "params": {
            "p": p,
            "q": power.map(|(_, q)| q),
            "f": params.nl.label(),
            "N": n,
            "m": params.m,
            "rtol": controls.rtol,
            "v_ceiling": controls.v_ceiling,
        },
        "classification": classification,
        "solve": solve,
        "ball_rates": ball,
        "whole_space": whole,
    });
    emit_json(&args.output, &doc)?;
    if failed > 0 {
        return Err(Failure::Compute(anyhow!("{failed} report section(s) failed")));
    }
    Ok(())
}
