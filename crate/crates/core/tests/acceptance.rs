use std::path::Path;
use std::time::{Duration, Instant};

use roughcert::cert::Certification;
use roughcert::grid::{DomainSpec, SpaceGrid};
use roughcert::heat_kernel::{self, SpectralBasis};
use roughcert::regularity;
use roughcert::rough;
use roughcert::scenario::{self, RunOptions};
use roughcert::Verdict;

struct Outcome {
    ok: bool,
    detail: String,
}

fn scenario_rows(text: &str) -> Vec<Certification> {
    let config = scenario::parse_config(text).expect("config");
    let sc = &config.scenarios[0];
    scenario::run_scenario(sc, config.seed, None).rows
}

fn expect_pass(rows: &[Certification], names: &[&str]) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in names {
        let hits: Vec<&Certification> = rows.iter().filter(|r| r.check == *name).collect();
        if hits.is_empty() {
            ok = false;
            detail.push(format!("{name}=missing"));
        }
        for r in hits {
            ok &= r.verdict == Verdict::Pass;
            detail.push(format!("{name}={:.4e}/{:.4e}", r.measured, r.threshold));
        }
    }
    Outcome {
        ok,
        detail: detail.join(" "),
    }
}

fn convergence() -> Outcome {
    let hs = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let errs: Vec<f64> = hs.iter().map(|&h| rough::sine_mode_error(h, h * h, 0.1).unwrap()).collect();
    let orders: Vec<f64> = errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    Outcome {
        ok: orders.iter().all(|&o| o >= 1.8),
        detail: format!("orders {orders:.3?}"),
    }
}

fn kernel_lower_bound() -> Outcome {
    let grid = SpaceGrid::new(DomainSpec::interval(-1.0, 1.0), 1.0 / 256.0).unwrap();
    let basis = SpectralBasis::compute(&grid).unwrap();
    let rep = heat_kernel::lower_bound_check(&grid, &basis, 1.0, 1.0, 2.0).unwrap();
    let certs = rep.certifications(1.0, 1.0, 2.0);
    let c = certs.iter().find(|c| c.check == "kernel_lower_bound").unwrap();
    Outcome {
        ok: c.passed() && c.measured > 0.0200,
        detail: format!("inf R Gamma {:.5} vs {:.5}", c.measured, c.threshold),
    }
}

const ROUGH_HEAD: &str = "[run]\nseed = 11\n[scenario s]\nkind = rough\n";

fn sandwich() -> Outcome {
    let rows = scenario_rows(&format!(
        "{ROUGH_HEAD}grid.h = 0.0078125\ntime.T = 0.1\ntime.dt = 0.0001\ncoef.a0 = 1\ncoef.c0 = 1.5\nsandwich.tol = 0.005\nchecks = monotonicity, sandwich\n"
    ));
    expect_pass(&rows, &["monotonicity", "sandwich"])
}

fn decay() -> Outcome {
    let coefs = [
        "coef.profile = oscillating\ncoef.omega = 5\ncoef.wavenumber = 3\n",
        "coef.profile = oscillating\ncoef.omega = 20\ncoef.wavenumber = 7\ncoef.phase = 0.3\n",
        "coef.profile = oscillating\ncoef.omega = 1\ncoef.wavenumber = 12\n",
        "coef.profile = checkerboard\ncoef.cells = 8\ncoef.time_cells = 8\n",
        "coef.profile = checkerboard\ncoef.cells = 32\ncoef.time_cells = 16\n",
    ];
    let mut ok = true;
    let mut fits = Vec::new();
    for coef in coefs {
        let rows = scenario_rows(&format!(
            "{ROUGH_HEAD}grid.h = 0.00390625\ntime.T = 0.1\ntime.dt = 0.00002\n{coef}coef.c0 = 1.5\nforcing.hole = 0.42\ndecay.radius = 0.4\nchecks = decay\n"
        ));
        let r = &rows[0];
        ok &= r.check == "decay" && r.passed() && r.params["levels"].as_u64().unwrap_or(0) >= 3;
        fits.push(r.measured);
    }
    let synthetic: Vec<f64> = (0..8).map(|k| 0.8f64.powi(k)).collect();
    let fit = regularity::fit_decay(&synthetic, 0.5, 0.5, 0.0);
    ok &= (fit.delta_fit - 0.2).abs() < 1e-12;
    Outcome {
        ok,
        detail: format!("delta_fit {fits:.3?}, synthetic {:.12}", fit.delta_fit),
    }
}

const REGULARITY_RUN: &str = "grid.h = 0.015625\ntime.T = 0.1\ntime.dt = 0.0004\ncoef.c0 = 1.5\nforcing.value = 1\nexps.epsilon = 0.05\n";

fn holder() -> Outcome {
    let rows = scenario_rows(&format!("{ROUGH_HEAD}{REGULARITY_RUN}checks = holder\n"));
    let mut out = expect_pass(&rows, &["holder"]);
    if let Some(r) = rows.first() {
        out.detail = format!("{} {}", out.detail, r.param_json());
    }
    out
}

fn boundary_and_short_time() -> Outcome {
    let rows = scenario_rows(&format!("{ROUGH_HEAD}{REGULARITY_RUN}checks = boundary_decay, short_time\n"));
    expect_pass(&rows, &["boundary_decay", "short_time"])
}

fn chemistry() -> Outcome {
    let rows = scenario_rows(
        "[scenario c]\nkind = chemistry\ngrid.h = 0.015625\ntime.T = 0.05\ntime.dt = 0.0001\nchem.d = 0.5, 1, 1.5, 2\naux.tol = 0.005\n\
         checks = positivity, conservation, chemistry_a_bounds, chemistry_aux_residual\n",
    );
    expect_pass(&rows, &["positivity", "conservation", "chemistry_a_bounds", "chemistry_aux_residual"])
}

fn skt() -> Outcome {
    let rows = scenario_rows(
        "[scenario k]\nkind = skt\ngrid.h = 0.015625\ntime.T = 0.05\ntime.dt = 0.0001\naux.tol = 0.005\n\
         checks = skt_v_bound, skt_nu_bounds, skt_aux_residual, skt_sandwich\n",
    );
    expect_pass(&rows, &["skt_v_bound", "skt_nu_bounds", "skt_aux_residual", "skt_sandwich"])
}

fn duality() -> Outcome {
    let rows = scenario_rows(
        "[run]\nseed = 5\n[scenario d]\nkind = duality\ngrid.h = 0.015625\ntime.T = 0.05\ntime.dt = 0.0005\nmu.lo = 1\nmu.hi = 3\n\
         duality.draws = 20\nduality.deltas = 0.05, 0.1, 0.25\n",
    );
    let mut out = expect_pass(&rows, &["duality_contraction", "modewise_contraction", "duality_bound"]);
    out.ok &= rows.iter().filter(|r| r.check == "duality_bound").count() == 3;
    out
}

fn determinism() -> Outcome {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/rough_interval.cfg");
    let config = scenario::load_config(&cfg).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let mut ledgers = Vec::new();
    for _ in 0..2 {
        let opts = RunOptions {
            out_root: Some(tmp.path().to_path_buf()),
            workers: None,
            seed: Some(20240611),
        };
        let summary = scenario::run_config(&config, &opts).unwrap();
        ledgers.push(std::fs::read(summary.dir.join("ledger.csv")).unwrap());
    }
    Outcome {
        ok: ledgers[0] == ledgers[1] && !ledgers[0].is_empty(),
        detail: format!("{} bytes", ledgers[0].len()),
    }
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("exact-solution convergence", 10, convergence),
        ("kernel lower bound", 30, kernel_lower_bound),
        ("comparison sandwich", 20, sandwich),
        ("oscillation decay", 60, decay),
        ("holder certification", 60, holder),
        ("boundary and short-time constants", 30, boundary_and_short_time),
        ("chemistry structure", 60, chemistry),
        ("skt structure", 90, skt),
        ("duality contraction", 60, duality),
        ("end-to-end determinism", 60, determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let ok = out.ok && took < Duration::from_secs(*budget);
        failures += usize::from(!ok);
        println!(
            "criterion {:>2} {:<36} {}  ({:.2}s) {}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
