//! Command execution. Each command returns the artifact text to emit.

use g2fermion::coeffs::a_matrix;
use g2fermion::fermion::*;
use g2fermion::graphs::{enumerate_to_order, jacobi_product, product_over};
use g2fermion::linalg::{det, identity_minus};
use g2fermion::modular::{check_invariance, InvarianceReport, Quantity};
use g2fermion::qseries::{dedekind_eta, theta1_char, SeriesPolicy, TwistData};
use g2fermion::sewing::*;
use g2fermion::Error;
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{Format, Params};
use crate::emit::{cx, fmt17, num, obj, to_csv, to_json};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Identity {
    PartitionOracle,
    GenformOracle,
    QfDet,
    JacobiProduct,
    Bosonization,
    RankOne,
    Modular,
}

impl Identity {
    pub fn name(self) -> &'static str {
        match self {
            Identity::PartitionOracle => "partition-oracle",
            Identity::GenformOracle => "genform-oracle",
            Identity::QfDet => "qf-det",
            Identity::JacobiProduct => "jacobi-product",
            Identity::Bosonization => "bosonization",
            Identity::RankOne => "rank-one",
            Identity::Modular => "modular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Z1,
    Z2,
    Z2Rank1,
    Z2Heisenberg,
    Szego,
    Genform,
    Virasoro,
    Check(Identity),
    Scan,
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Z1 => "z1".into(),
            Command::Z2 => "z2".into(),
            Command::Z2Rank1 => "z2-rank1".into(),
            Command::Z2Heisenberg => "z2-heisenberg".into(),
            Command::Szego => "szego".into(),
            Command::Genform => "genform".into(),
            Command::Virasoro => "virasoro".into(),
            Command::Check(i) => format!("check {}", i.name()),
            Command::Scan => "scan".into(),
        }
    }
}

/// Reference order used for self-convergence of truncated-matrix quantities.
const REFERENCE_EXTRA_ORDER: usize = 4;

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn chars(p: &Params) -> Result<CharPair, Error> {
    CharPair::new(p.t1, p.t2)
}

fn twist(p: &Params, a: Torus) -> &TwistData {
    match a {
        Torus::One => &p.t1,
        Torus::Two => &p.t2,
    }
}

fn point(p: &SurfacePoint) -> Value {
    obj(vec![("torus", Value::from(p.torus.index())), ("z", cx(p.z))])
}

fn truncation(p: &Params) -> Value {
    obj(vec![
        ("M", Value::from(p.m)),
        ("W", num(p.weight_cap)),
        ("series_tol", num(p.policy.rel_tol)),
        ("max_terms", Value::from(p.policy.max_terms)),
    ])
}

/// Self-convergence from re-evaluating at `M + 4`.
fn order_convergence<F>(p: &Params, value: Complex64, f: F) -> Result<Value, Error>
where
    F: Fn(&SewingConfig) -> Result<Complex64, Error>,
{
    let m_ref = p.m + REFERENCE_EXTRA_ORDER;
    let reference = f(&p.sewing().with_order(m_ref))?;
    Ok(obj(vec![("reference_M", Value::from(m_ref)), ("rel_diff", num(rel(value, reference)))]))
}

/// Self-convergence from re-evaluating with a 100× tighter series tolerance.
fn policy_convergence<F>(p: &Params, value: Complex64, f: F) -> Result<Value, Error>
where
    F: Fn(&SeriesPolicy) -> Result<Complex64, Error>,
{
    let tight = SeriesPolicy { rel_tol: (p.policy.rel_tol * 1e-2).max(1e-16), max_terms: p.policy.max_terms * 2 };
    let reference = f(&tight)?;
    Ok(obj(vec![("reference_series_tol", num(tight.rel_tol)), ("rel_diff", num(rel(value, reference)))]))
}

fn artifact(cmd: &Command, p: &Params, result: Value, conv: Value) -> String {
    let config = obj(p.echo.iter().map(|(k, v)| (*k, Value::from(v.clone()))).collect());
    to_json(&obj(vec![
        ("command", Value::from(cmd.name())),
        ("config", config),
        ("truncation", truncation(p)),
        ("result", result),
        ("self_convergence", conv),
    ]))
}

fn need_points(p: &Params, n: usize, what: &str) -> Result<(), CliError> {
    if p.ws.len() < n || p.zs.len() < n {
        return Err(CliError::Usage(format!("{what} needs at least {n} point(s) in each of --w and --z")));
    }
    Ok(())
}

pub fn run(cmd: &Command, p: &Params) -> Result<String, CliError> {
    if p.format == Format::Csv && *cmd != Command::Scan {
        return Err(CliError::Usage("csv output is only available for scan".into()));
    }
    let cfg = p.sewing();
    let out = match cmd {
        Command::Z1 => {
            let t = twist(p, p.torus);
            let m = cfg.tau(p.torus);
            let v = z1_partition(t, m, &p.policy)?;
            let conv = if t.is_degenerate() {
                obj(vec![("rel_diff", num(0.0))])
            } else {
                policy_convergence(p, v, |pol| z1_partition(t, m, pol))?
            };
            let mut res = vec![("torus", Value::from(p.torus.index())), ("value", cx(v))];
            if let Ok(r) = z1_partition_rank1(t, m, &p.policy) {
                res.push(("rank1", cx(r)));
            }
            artifact(cmd, p, obj(res), conv)
        }
        Command::Z2 => {
            let ch = chars(p)?;
            let v = z2_partition(&cfg, &ch)?;
            let d = det_i_minus_q(&cfg, &ch.t1, &ch.t2)?;
            let z1 = z1_partition(&ch.t1, cfg.tau1(), &p.policy)?;
            let z2 = z1_partition(&ch.t2, cfg.tau2(), &p.policy)?;
            let conv = order_convergence(p, v, |c| z2_partition(c, &ch))?;
            let res = obj(vec![
                ("value", cx(v)),
                ("det_i_minus_q", cx(d)),
                ("z1_product", cx(z1 * z2)),
                ("domain_bound", num(cfg.domain_bound())),
            ]);
            artifact(cmd, p, res, conv)
        }
        Command::Z2Rank1 => {
            let ch = chars(p)?;
            let v = z2_partition_rank1(&cfg, &ch)?;
            let conv = order_convergence(p, v, |c| z2_partition_rank1(c, &ch))?;
            let res = obj(vec![("value", cx(v)), ("branch_samples", Value::from(BRANCH_SAMPLES))]);
            artifact(cmd, p, res, conv)
        }
        Command::Z2Heisenberg => {
            let v = z2_heisenberg(&cfg)?;
            let conv = order_convergence(p, v, z2_heisenberg)?;
            artifact(cmd, p, obj(vec![("value", cx(v))]), conv)
        }
        Command::Szego => {
            need_points(p, 1, "szego")?;
            let (x, y) = (p.ws[0], p.zs[0]);
            let v = szego_g2(&x, &y, &cfg, &p.t1, &p.t2)?;
            let conv = order_convergence(p, v, |c| szego_g2(&x, &y, c, &p.t1, &p.t2))?;
            let mut res = vec![("x", point(&x)), ("y", point(&y)), ("value", cx(v))];
            if x.torus == y.torus {
                let a = x.torus;
                res.push(("genus_one", cx(szego_g1(x.z, y.z, twist(p, a), cfg.tau(a), &p.policy)?)));
            }
            artifact(cmd, p, obj(res), conv)
        }
        Command::Genform => {
            let ch = chars(p)?;
            if p.ws.len() != p.zs.len() {
                return Err(CliError::Usage("--w and --z need the same number of points".into()));
            }
            let v = gen_form_2n(&p.ws, &p.zs, &cfg, &ch)?;
            let conv = order_convergence(p, v, |c| gen_form_2n(&p.ws, &p.zs, c, &ch))?;
            let mut res = vec![
                ("w", Value::Array(p.ws.iter().map(point).collect())),
                ("z", Value::Array(p.zs.iter().map(point).collect())),
                ("value", cx(v)),
            ];
            let split = p.ws.iter().all(|x| x.torus == Torus::One) && p.zs.iter().all(|x| x.torus == Torus::Two);
            if split && !p.ws.is_empty() {
                let o = gen_form_direct_oracle(&p.ws, &p.zs, &cfg, &ch, &CutoffPolicy::new(p.weight_cap))?;
                res.push(("oracle", cx(o)));
                res.push(("oracle_rel_diff", num(rel(o, v))));
            }
            artifact(cmd, p, obj(res), conv)
        }
        Command::Virasoro => {
            if p.ws.is_empty() {
                return Err(CliError::Usage("virasoro needs the point in --w".into()));
            }
            let ch = chars(p)?;
            let z = p.ws[0];
            let v = virasoro_onept(&z, &cfg, &ch)?;
            let (r1, r2) = virasoro_extrapolants(&z, &cfg, &ch, Complex64::new(1.0, 0.0))?;
            let conv = obj(vec![("extrapolant_rel_diff", num(rel(r1, r2)))]);
            let res = obj(vec![("z", point(&z)), ("value", cx(v)), ("extrapolants", Value::Array(vec![cx(r1), cx(r2)]))]);
            artifact(cmd, p, res, conv)
        }
        Command::Check(id) => {
            let res = check(*id, p, &cfg)?;
            artifact(cmd, p, res, obj(vec![]))
        }
        Command::Scan => scan(p, &cfg)?,
    };
    Ok(out)
}

fn verdict(fields: Vec<(&str, Value)>, passed: bool) -> Value {
    let mut f = fields;
    f.push(("passed", Value::from(passed)));
    obj(f)
}

fn report(r: &InvarianceReport) -> Value {
    obj(vec![
        ("quantity", Value::from(r.quantity)),
        ("original", cx(r.original)),
        ("image", r.image.map(cx).unwrap_or(Value::Null)),
        ("rel_diff", num(r.rel_diff)),
        ("exact", Value::from(r.exact)),
        ("passed", Value::from(r.passed)),
        ("skipped", r.skipped.clone().map(Value::from).unwrap_or(Value::Null)),
    ])
}

fn check(id: Identity, p: &Params, cfg: &SewingConfig) -> Result<Value, CliError> {
    let tol = |d: f64| p.check_tol.unwrap_or(d);
    let v = match id {
        Identity::PartitionOracle => {
            let ch = chars(p)?;
            let d = z2_partition(cfg, &ch)?;
            let o = z2_direct_oracle(cfg, &ch, &CutoffPolicy::new(p.weight_cap))?;
            let r = rel(o, d);
            verdict(vec![("determinant", cx(d)), ("oracle", cx(o)), ("rel_diff", num(r)), ("tolerance", num(tol(1e-9)))], r < tol(1e-9))
        }
        Identity::GenformOracle => {
            need_points(p, 1, "genform-oracle")?;
            let ch = chars(p)?;
            let g = gen_form_2n(&p.ws, &p.zs, cfg, &ch)?;
            let o = gen_form_direct_oracle(&p.ws, &p.zs, cfg, &ch, &CutoffPolicy::new(p.weight_cap))?;
            let r = rel(o, g);
            verdict(vec![("determinant", cx(g)), ("oracle", cx(o)), ("rel_diff", num(r)), ("tolerance", num(tol(1e-6)))], r < tol(1e-6))
        }
        Identity::QfDet => {
            let dq = det_i_minus_q(cfg, &p.t1, &p.t2)?;
            let df = det_i_minus_f1f2(cfg, &p.t1, &p.t2)?;
            let dx = det_i_minus_q(&cfg.with_xi(cfg.xi().flipped()), &p.t1, &p.t2)?;
            let (r, rx) = (rel(dq, df), rel(dx, dq));
            verdict(
                vec![
                    ("det_i_minus_q", cx(dq)),
                    ("det_i_minus_f1f2", cx(df)),
                    ("rel_diff", num(r)),
                    ("xi_flip_rel_diff", num(rx)),
                    ("tolerance", num(tol(1e-12))),
                ],
                r < tol(1e-12) && rx < 1e-14,
            )
        }
        Identity::JacobiProduct => {
            let ch = chars(p)?;
            let eps = if cfg.eps() == Complex64::new(0.0, 0.0) {
                Complex64::new(0.02 * cfg.domain_bound(), 0.0)
            } else {
                cfg.eps()
            };
            let resid = |e: Complex64| -> Result<f64, Error> {
                let (a, b) = jacobi_product(&cfg.with_eps(e), &ch, p.order)?;
                Ok((a - b).norm())
            };
            let (r1, r2) = (resid(eps)?, resid(eps / 2.0)?);
            let fit = (r1 / r2).log2();
            // 1×1 truncation of the Heisenberg factor is exact
            let one = cfg.with_eps(eps).with_order(1);
            let (a1, a2) = (a_matrix(Torus::One, &one)?, a_matrix(Torus::Two, &one)?);
            let single = (product_over(&enumerate_to_order(2 * p.order, 0, 1), &a1, &a2)?
                - det(&identity_minus(&(a1.matrix() * a2.matrix()))))
            .norm();
            verdict(
                vec![
                    ("eps", cx(eps)),
                    ("order", Value::from(p.order)),
                    ("max_residual", num(r1.max(r2))),
                    ("fitted_order", num(fit)),
                    ("single_mode_residual", num(single)),
                ],
                fit > p.order as f64 && single < 1e-15,
            )
        }
        Identity::Bosonization => {
            let t = twist(p, p.torus);
            let m = cfg.tau(p.torus);
            let z = z1_partition(t, m, &p.policy)?;
            let th = theta1_char(t.alpha(), t.beta(), Complex64::new(0.0, 0.0), m, &p.policy)?;
            let b = Complex64::new(0.0, -std::f64::consts::TAU * t.alpha() * t.beta()).exp() * th / dedekind_eta(m, &p.policy)?;
            let r = rel(z, b);
            verdict(vec![("product", cx(z)), ("theta_over_eta", cx(b)), ("rel_diff", num(r)), ("tolerance", num(tol(1e-10)))], r < tol(1e-10))
        }
        Identity::RankOne => {
            let ch = chars(p)?;
            let one = z2_partition_rank1(cfg, &ch)?;
            let two = z2_partition(cfg, &ch)?;
            let r = rel(one * one, two);
            verdict(vec![("rank1", cx(one)), ("rank2", cx(two)), ("rel_diff", num(r)), ("tolerance", num(tol(1e-12)))], r < tol(1e-12))
        }
        Identity::Modular => {
            let ch = chars(p)?;
            let mut reports = vec![check_invariance(&Quantity::Z2, &p.word, cfg, &ch, tol(1e-8))?];
            if let (Some(w), Some(z)) = (p.ws.first(), p.zs.first()) {
                reports.push(check_invariance(&Quantity::GenForm1(*w, *z), &p.word, cfg, &ch, tol(1e-6))?);
            }
            let passed = reports.iter().all(|r| r.passed || r.skipped.is_some());
            verdict(vec![("reports", Value::Array(reports.iter().map(report).collect()))], passed)
        }
    };
    Ok(v)
}

struct ScanRow {
    eps: Complex64,
    inside: bool,
    values: Option<(f64, Complex64)>,
    error: Option<String>,
}

fn scan(p: &Params, cfg: &SewingConfig) -> Result<String, CliError> {
    let ch = chars(p)?;
    let n = p.eps_grid.max(1);
    let half = p.scan_extent * cfg.domain_bound();
    let coord = |i: usize| if n == 1 { 0.0 } else { -half + 2.0 * half * i as f64 / (n - 1) as f64 };
    let rows: Vec<ScanRow> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let eps = Complex64::new(coord(k % n), coord(k / n));
            let c = cfg.with_eps(eps);
            if c.require_domain().is_err() {
                return ScanRow { eps, inside: false, values: None, error: None };
            }
            let res = z2_partition(&c, &ch).and_then(|z| Ok((z.norm(), det_i_minus_q(&c, &ch.t1, &ch.t2)?)));
            match res {
                Ok(v) => ScanRow { eps, inside: true, values: Some(v), error: None },
                Err(e) => ScanRow { eps, inside: true, values: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let filtered = rows.iter().filter(|r| !r.inside).count();
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    for (i, r) in rows.iter().enumerate() {
        if let Some(e) = &r.error {
            eprintln!("scan point {i}: {e}");
        }
    }
    match p.format {
        Format::Csv => {
            let header = ["index", "eps_re", "eps_im", "in_domain", "abs_z2", "det_re", "det_im", "M", "series_tol"];
            let body: Vec<Vec<String>> = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let (a, d) = match r.values {
                        Some((a, d)) => (fmt17(a), [fmt17(d.re), fmt17(d.im)]),
                        None => (String::new(), [String::new(), String::new()]),
                    };
                    vec![
                        i.to_string(),
                        fmt17(r.eps.re),
                        fmt17(r.eps.im),
                        (r.inside as u8).to_string(),
                        a,
                        d[0].clone(),
                        d[1].clone(),
                        p.m.to_string(),
                        fmt17(p.policy.rel_tol),
                    ]
                })
                .collect();
            eprintln!("scan: {} points, {filtered} outside the sewing domain, {failed} failed", rows.len());
            Ok(to_csv(&header, &body))
        }
        Format::Json => {
            let pts = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    obj(vec![
                        ("index", Value::from(i)),
                        ("eps", cx(r.eps)),
                        ("in_domain", Value::from(r.inside)),
                        ("abs_z2", r.values.map(|v| num(v.0)).unwrap_or(Value::Null)),
                        ("det_i_minus_q", r.values.map(|v| cx(v.1)).unwrap_or(Value::Null)),
                        ("error", r.error.clone().map(Value::from).unwrap_or(Value::Null)),
                    ])
                })
                .collect();
            let res = obj(vec![
                ("grid", Value::from(n)),
                ("half_width", num(half)),
                ("domain_bound", num(cfg.domain_bound())),
                ("filtered", Value::from(filtered)),
                ("failed", Value::from(failed)),
                ("points", Value::Array(pts)),
            ]);
            Ok(artifact(&Command::Scan, p, res, obj(vec![])))
        }
    }
}
