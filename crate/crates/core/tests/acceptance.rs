//! Acceptance suite. One line per criterion; the process fails if any
//! criterion fails. Runs as a plain binary so the report is never captured.

use std::fs;
use std::process::ExitCode;

use dynkin_core::cli::{cmd_verify, ExitStatus, Preset, RunConfig, VERIFY_FILE};
use dynkin_core::game::solve_game_with_grid;
use dynkin_core::mc::{compare_with_value, extrema_check, saddle_check, start_grid, SimConfig};
use dynkin_core::wiener_hopf::{check_wh_identity, standard_identity_grid};
use dynkin_core::{GameSolution, GameSpec};

const THRESHOLD_TOL: f64 = 5e-4;
const ROOT_TOL: f64 = 5e-4;
const WH_TOL: f64 = 1e-10;
const JUMP_ZERO_TOL: f64 = 1e-8;
const JUMP_NONZERO_MIN: f64 = 1e-3;
const JUMP_PREDICTION_TOL: f64 = 1e-8;
const CERTIFY_GRID: usize = 1001;
const MC_PATHS: usize = 100_000;
const MC_SEED: u64 = 42;
const START_POINTS: usize = 9;
const SADDLE_OFFSETS: [f64; 4] = [-0.5, -0.25, 0.25, 0.5];
const BM_DT: f64 = 1e-4;

type Criterion = (&'static str, fn() -> Vec<Check>);

struct Check {
    label: String,
    ok: bool,
}

fn check(ok: bool, label: impl Into<String>) -> Check {
    Check {
        ok,
        label: label.into(),
    }
}

fn near(label: &str, got: f64, want: f64, tol: f64) -> Check {
    check(
        (got - want).abs() <= tol,
        format!("{label}: got {got:.7}, want {want} ± {tol:e}"),
    )
}

fn spec(preset: Preset) -> GameSpec {
    RunConfig::preset(preset).spec().expect("preset spec")
}

fn solution(preset: Preset) -> GameSolution {
    solve_game_with_grid(&spec(preset), CERTIFY_GRID).expect("preset solves")
}

fn thresholds() -> Vec<Check> {
    let bm = solution(Preset::BmSym);
    let drift = solution(Preset::BmDrift);
    let cl = solution(Preset::Cl);
    let cp = solution(Preset::CpSym);
    let asym = solution(Preset::CpAsym);
    vec![
        near("bm-sym x_S", bm.x_s(), 1.6955, THRESHOLD_TOL),
        near("bm-sym x_I", bm.x_i(), -1.6955, THRESHOLD_TOL),
        near("bm-drift x_I", drift.x_i(), -1.2426, THRESHOLD_TOL),
        near("bm-drift x_S", drift.x_s(), 2.3659, THRESHOLD_TOL),
        near("cl x_I", cl.x_i(), -1.6127, THRESHOLD_TOL),
        near("cl x_S", cl.x_s(), 1.4931, THRESHOLD_TOL),
        near("cp-sym x_S", cp.x_s(), 1.5901, THRESHOLD_TOL),
        near("cp-sym x_I", cp.x_i(), -1.5901, THRESHOLD_TOL),
        near("cp-asym x_I", asym.x_i(), -3.7750, THRESHOLD_TOL),
        near("cp-asym x_S", asym.x_s(), 0.0834, THRESHOLD_TOL),
    ]
}

fn coefficients() -> Vec<Check> {
    let bm = solution(Preset::BmSym);
    let cl = solution(Preset::Cl);
    let cp = solution(Preset::CpSym);
    let asym = solution(Preset::CpAsym);
    // two units of the last printed digit
    vec![
        near("bm-sym A_I", bm.a_i(), -0.0058, 2e-4),
        near("bm-sym A_S", bm.a_s(), 0.0058, 2e-4),
        near("cl A_I", cl.a_i(), -0.0904, 2e-4),
        near("cl A_S", cl.a_s(), 0.0038, 2e-4),
        near("cp-sym A_I", cp.a_i(), -0.112, 2e-3),
        near("cp-sym A_S", cp.a_s(), 0.112, 2e-3),
        near("cp-asym A_I", asym.a_i(), -0.998, 2e-3),
        near("cp-asym A_S", asym.a_s(), 1.312e-5, 2e-8),
    ]
}

fn roots() -> Vec<Check> {
    let f = |p| *solution(p).factors();
    let (bm, drift, cl, cp, asym) = (
        f(Preset::BmSym),
        f(Preset::BmDrift),
        f(Preset::Cl),
        f(Preset::CpSym),
        f(Preset::CpAsym),
    );
    vec![
        near("bm-sym r_I", bm.r_i, std::f64::consts::SQRT_2, ROOT_TOL),
        near("bm-sym r_S", bm.r_s, std::f64::consts::SQRT_2, ROOT_TOL),
        near("bm-drift r_I", drift.r_i, 2.732, ROOT_TOL),
        near("bm-drift r_S", drift.r_s, 0.732, ROOT_TOL),
        near("cl r_I", cl.r_i, 0.618, ROOT_TOL),
        near("cl r_S", cl.r_s, 1.618, ROOT_TOL),
        near("cp-sym r_I", cp.r_i, 0.577, ROOT_TOL),
        near("cp-sym r_S", cp.r_s, 0.577, ROOT_TOL),
        near("cp-asym r_I", asym.r_i, 0.265, ROOT_TOL),
        near("cp-asym r_S", asym.r_s, 2.265, ROOT_TOL),
    ]
}

fn wh_identity() -> Vec<Check> {
    Preset::ALL
        .into_iter()
        .map(|p| {
            let sol = solution(p);
            let s = sol.spec();
            let grid = standard_identity_grid(sol.factors());
            match check_wh_identity(s.model(), s.r(), sol.factors(), &grid) {
                Ok(err) => check(
                    err <= WH_TOL,
                    format!("{}: max relative error {err:e}", p.name()),
                ),
                Err(e) => check(false, format!("{}: {e}", p.name())),
            }
        })
        .collect()
}

fn smooth_pasting() -> Vec<Check> {
    let mut out = Vec::new();
    for p in Preset::ALL {
        let sol = solution(p);
        let j = *sol.pasting().expect("pasting");
        let name = p.name();
        let zero = |label: &str, v: f64| {
            check(
                v.abs() <= JUMP_ZERO_TOL,
                format!("{name} {label} = {v:e} is zero"),
            )
        };
        let nonzero = |label: &str, v: f64| {
            check(
                v.abs() > JUMP_NONZERO_MIN,
                format!("{name} {label} = {v:.6} is nonzero"),
            )
        };
        match p {
            Preset::BmSym | Preset::BmDrift => {
                out.push(zero("jump_I", j.jump_i));
                out.push(zero("jump_S", j.jump_s));
            }
            Preset::Cl => {
                out.push(zero("jump_S", j.jump_s));
                out.push(nonzero("jump_I", j.jump_i));
            }
            Preset::CpSym | Preset::CpAsym => {
                out.push(nonzero("jump_I", j.jump_i));
                out.push(nonzero("jump_S", j.jump_s));
            }
        }
        out.push(near(
            &format!("{name} jump_I vs atom prediction"),
            j.jump_i,
            j.predicted_i,
            JUMP_PREDICTION_TOL,
        ));
        out.push(near(
            &format!("{name} jump_S vs atom prediction"),
            j.jump_s,
            j.predicted_s,
            JUMP_PREDICTION_TOL,
        ));
    }
    out
}

fn certification() -> Vec<Check> {
    Preset::ALL
        .into_iter()
        .map(|p| {
            let sol = solution(p);
            check(sol.certified(), format!("{}: {:?}", p.name(), sol.checks()))
        })
        .collect()
}

fn sim_config(preset: Preset) -> SimConfig {
    let mut cfg = SimConfig::for_discount(MC_PATHS, MC_SEED, spec(preset).r());
    if matches!(preset, Preset::BmSym | Preset::BmDrift) {
        cfg.dt = BM_DT;
    }
    cfg
}

fn mc_equivalence() -> Vec<Check> {
    let mut out = Vec::new();
    for p in Preset::ALL {
        let sol = solution(p);
        let cfg = sim_config(p);
        match compare_with_value(&sol, &start_grid(&sol, START_POINTS), &cfg) {
            Ok(points) => {
                for c in points {
                    out.push(check(
                        c.pass,
                        format!(
                            "{} payoff at x0 = {:.4}: {:.5} ± {:.5} vs V = {:.5}",
                            p.name(),
                            c.x0,
                            c.estimate,
                            c.std_error,
                            c.value
                        ),
                    ));
                }
            }
            Err(e) => out.push(check(false, format!("{} payoff: {e}", p.name()))),
        }
        match saddle_check(sol.spec(), 0.0, &sol, &SADDLE_OFFSETS, &cfg) {
            Ok(report) => {
                for c in &report.cells {
                    out.push(check(
                        c.pass,
                        format!(
                            "{} saddle {:?} offset {:+}: {:.5} against bound {:.5}",
                            p.name(),
                            c.deviation,
                            c.offset,
                            c.estimate,
                            c.bound
                        ),
                    ));
                }
            }
            Err(e) => out.push(check(false, format!("{} saddle: {e}", p.name()))),
        }
    }
    out
}

fn extrema_laws() -> Vec<Check> {
    let mut out = Vec::new();
    for p in [Preset::Cl, Preset::CpSym, Preset::CpAsym] {
        let sol = solution(p);
        let s = sol.spec();
        match extrema_check(s.model(), s.r(), sol.factors(), &sim_config(p)) {
            Ok(report) => {
                for (side, law) in [("inf", report.infimum), ("sup", report.supremum)] {
                    out.push(check(
                        law.atom_pass,
                        format!(
                            "{} {side} atom {:.5} ± {:.5} vs {:.5}",
                            p.name(),
                            law.atom_estimate,
                            law.atom_std_error,
                            law.atom_expected
                        ),
                    ));
                    out.push(check(
                        law.ks_pass,
                        format!(
                            "{} {side} KS {:.5} < {:.5}",
                            p.name(),
                            law.ks_statistic,
                            law.ks_critical
                        ),
                    ));
                }
            }
            Err(e) => out.push(check(false, format!("{}: {e}", p.name()))),
        }
    }
    out
}

fn verify_bytes(cfg: &RunConfig) -> Result<Vec<u8>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = cfg.clone();
    cfg.output.directory = dir.path().to_path_buf();
    match cmd_verify(&cfg) {
        Ok(ExitStatus::Success) | Ok(ExitStatus::VerificationFailed) => {}
        Ok(other) => return Err(format!("unexpected status {other:?}")),
        Err(e) => return Err(e.to_string()),
    }
    fs::read(dir.path().join(VERIFY_FILE)).map_err(|e| e.to_string())
}

fn determinism() -> Vec<Check> {
    let mut bm = RunConfig::preset(Preset::BmDrift);
    bm.mc.paths = 2_000;
    let configs = [
        ("cl", RunConfig::preset(Preset::Cl)),
        ("bm-drift, 2000 paths", bm),
    ];
    configs
        .iter()
        .map(|(name, cfg)| match (verify_bytes(cfg), verify_bytes(cfg)) {
            (Ok(a), Ok(b)) => check(
                a == b,
                format!("{name}: {} bytes, identical across runs", a.len()),
            ),
            (Err(e), _) | (_, Err(e)) => check(false, format!("{name}: {e}")),
        })
        .collect()
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("threshold reproduction", thresholds),
        ("coefficient reproduction", coefficients),
        ("root reproduction", roots),
        ("Wiener-Hopf identity", wh_identity),
        ("smooth-pasting corollaries", smooth_pasting),
        ("hypothesis certification", certification),
        ("Monte-Carlo oracle equivalence", mc_equivalence),
        ("extrema-law agreement", extrema_laws),
        ("determinism of verify.json", determinism),
    ];

    let mut failed = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let checks = run();
        let bad: Vec<&Check> = checks.iter().filter(|c| !c.ok).collect();
        let verdict = if bad.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "criterion {}: {title} ... {verdict} ({} checks)",
            k + 1,
            checks.len()
        );
        for c in bad {
            println!("    {}", c.label);
        }
        if verdict == "FAIL" {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
