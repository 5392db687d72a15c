//! Acceptance report: one PASS/FAIL line per criterion.
//! Set `ACCEPTANCE_STRICT` to turn any FAIL into a nonzero exit.

use std::time::Instant;

use rand::Rng;
use spectrum_subsidy::closed_form::{optimum_fees, reduced_foc_residuals, viete_roots};
use spectrum_subsidy::config::ExperimentConfig;
use spectrum_subsidy::dynamics::{monte_carlo, run_rng, solve_equilibrium, InstanceRanges};
use spectrum_subsidy::figures::{generate, relative_spread, FigureId, Table};
use spectrum_subsidy::foc::{
    best_response_provider, profile_residuals, smooth_objective, smooth_objective_at, BestResponseOptions,
    OpponentPoint,
};
use spectrum_subsidy::government::sweep;
use spectrum_subsidy::market::{choice_probabilities, outside_calls_served, provider_objective};
use spectrum_subsidy::{GovernmentPolicy, MarketConfig, StrategyProfile};

const MAX_ITER: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn col(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap_or_else(|| panic!("missing column {name}"))
}

fn table2_reproduction() -> Outcome {
    let cfg = MarketConfig::two_by_two(26, 744, 76.0, 0.05, 1000.0).unwrap();
    let policy = GovernmentPolicy::split(&cfg, 262.0).unwrap();
    let start = Instant::now();
    let eq = solve_equilibrium(&cfg, &policy, 1e-3, MAX_ITER).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let residual = profile_residuals(&eq.profile, &policy, &cfg)
        .unwrap()
        .iter()
        .map(|r| r.max_abs())
        .fold(0.0, f64::max);
    let budget = [(0, 262.0), (1, 738.0)]
        .iter()
        .map(|&(j, xi)| (eq.profile.total_spend(j) - xi).abs() / xi)
        .fold(0.0, f64::max);
    let pass = eq.converged && (1..=500).contains(&eq.iterations) && secs < 10.0 && residual <= 1e-6 && budget <= 1e-3;
    outcome(
        pass,
        format!(
            "converged={} in {} iterations ({secs:.2}s), max FOC residual {residual:.2e}, budget gap {budget:.2e}",
            eq.converged, eq.iterations
        ),
    )
}

fn monte_carlo_statistics() -> Outcome {
    let start = Instant::now();
    let report = monte_carlo(&InstanceRanges::default(), 10_000, 0, 1e-3, MAX_ITER).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let fast = report.fraction_fast();
    let stuck = report.fraction_nonconverged();
    outcome(
        fast >= 0.85 && stuck <= 0.01 && secs < 600.0,
        format!(
            "{:.2}% within 15 iterations, {}/{}/{} in 16-99/>=100/nonconverged ({secs:.1}s)",
            100.0 * fast,
            report.from_16_to_99,
            report.at_least_100,
            report.nonconverged
        ),
    )
}

fn closed_form_fidelity(fig3b: &Table, fig5a: &Table) -> Outcome {
    let xi1 = col(fig3b, "xi1");
    let grants = |i: usize| [xi1[i], 1000.0 - xi1[i]];
    let mut spend_err: f64 = 0.0;
    let mut worst_at = 0.0;
    for (num, closed, j) in [("s11", "s11_closed", 0), ("s12", "s12_closed", 0), ("s21", "s21_closed", 1), ("s22", "s22_closed", 1)] {
        let (a, b) = (col(fig3b, num), col(fig3b, closed));
        for i in 0..a.len() {
            let e = (a[i] - b[i]).abs() / grants(i)[j];
            if e > spend_err {
                spend_err = e;
                worst_at = xi1[i];
            }
        }
    }
    let mut fee_err: f64 = 0.0;
    for (num, closed) in [("f1", "f1_closed"), ("f2", "f2_closed")] {
        let (a, b) = (col(fig5a, num), col(fig5a, closed));
        for i in 0..a.len() {
            fee_err = fee_err.max((a[i] - b[i]).abs() / a[i]);
        }
    }
    let complete = xi1.len() == 19 && col(fig5a, "xi1").len() == 19;
    outcome(
        complete && spend_err <= 0.05 && fee_err <= 0.05,
        format!(
            "{} points; spend error {:.2}% of grant (worst at xi1={worst_at}), fee error {:.2}%",
            xi1.len(),
            100.0 * spend_err,
            100.0 * fee_err
        ),
    )
}

fn theorem_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [10u64, 40, 200, 1000] {
        for beta in [30.0, 76.0, 150.0] {
            for xi1 in (1..20).map(|i| 50.0 * i as f64) {
                let cfg = MarketConfig::two_by_two(n, n, beta, 0.05, 1000.0).unwrap();
                let policy = GovernmentPolicy::split(&cfg, xi1).unwrap();
                let cf = optimum_fees(&cfg, &policy).unwrap();
                let (r1, r2) = reduced_foc_residuals(cf.f_star[0], cf.f_star[1], cf.s1_star, cf.s2_star, &cfg);
                worst = worst.max(r1.abs()).max(r2.abs());
                count += 1;
            }
        }
    }
    outcome(worst <= 1e-8, format!("{count} instances, max reduced residual {worst:.2e}"))
}

fn branch_selection(fig10: &Table) -> Outcome {
    let (k0, k1, k2, f) = (col(fig10, "f1_k0"), col(fig10, "f1_k1"), col(fig10, "f1_k2"), col(fig10, "f1"));
    let near = |a: f64, b: f64| (a - b).abs() <= 0.05 * b.abs();
    let hits = (0..f.len())
        .filter(|&i| near(k1[i], f[i]) && !near(k0[i], f[i]) && !near(k2[i], f[i]))
        .count();
    let share = hits as f64 / f.len() as f64;
    outcome(share >= 0.95, format!("k=1 uniquely within 5% at {hits}/{} points", f.len()))
}

fn invariant_suite() -> Outcome {
    let start = Instant::now();
    let mut failures: Vec<&str> = Vec::new();
    let ranges = InstanceRanges::default();

    // Simplex, conservation and alpha-independence on random market states.
    let (mut simplex, mut conserve, mut alpha_gap) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..500 {
        let mut rng = run_rng(6, i);
        let k = rng.random_range(1..5usize);
        let j = rng.random_range(1..5usize);
        let n: Vec<u64> = (0..k).map(|_| rng.random_range(1..1000)).collect();
        let alpha = rng.random_range(0.1..10.0);
        let cfg = MarketConfig::new(n, j, rng.random_range(1.0..200.0), alpha, 0.05, 1000.0)
            .unwrap()
            .with_initial_cash(vec![500.0; j])
            .unwrap();
        let spend: Vec<Vec<f64>> = (0..j).map(|_| (0..k).map(|_| rng.random_range(1e-3..100.0)).collect()).collect();
        let fees: Vec<f64> = (0..j).map(|_| rng.random_range(0.0..30.0)).collect();
        let p = StrategyProfile::new(spend, fees).unwrap();
        for region in 0..k {
            let s: f64 = choice_probabilities(region, &p, &cfg).iter().sum();
            simplex = simplex.max((s - 1.0).abs());
        }
        let total: f64 = (0..j).map(|q| outside_calls_served(q, &p, &cfg).unwrap()).sum();
        let expect = if k > 1 { alpha * cfg.total_customers() as f64 } else { 0.0 };
        conserve = conserve.max((total - expect).abs() / expect.max(1.0));
        let policy = GovernmentPolicy::linear(&cfg, vec![1000.0 / j as f64; j]).unwrap();
        let scaled = cfg.clone().with_outside_calls(alpha * rng.random_range(0.01..100.0)).unwrap();
        for q in 0..j {
            let a = provider_objective(q, &p, &policy, &cfg).unwrap();
            let b = provider_objective(q, &p, &policy, &scaled).unwrap();
            alpha_gap = alpha_gap.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
        }
    }
    if simplex > 1e-12 {
        failures.push("simplex");
    }
    if conserve > 1e-9 {
        failures.push("conservation");
    }
    if alpha_gap > 1e-12 {
        failures.push("alpha-independence");
    }

    // Monotone improvement and epsilon-Nash along solved instances.
    let mut worst_drop: f64 = 0.0;
    let mut worst_gain: f64 = f64::NEG_INFINITY;
    for i in 0..30 {
        let inst = ranges.sample(&mut run_rng(8, i));
        let (cfg, policy) = ranges.market(&inst).unwrap();
        let eq = solve_equilibrium(&cfg, &policy, 1e-3, MAX_ITER).unwrap();
        for w in eq.trace.windows(2) {
            let (b, a) = (&w[0].profile, &w[1].profile);
            let mid = StrategyProfile::two_by_two(
                [[a.spend(0, 0), a.spend(0, 1)], [b.spend(1, 0), b.spend(1, 1)]],
                [a.fee(0), b.fee(1)],
            )
            .unwrap();
            for (j, from, to) in [(0, b, &mid), (1, &mid, a)] {
                let (v0, v1) = (smooth_objective(j, from, &cfg), smooth_objective(j, to, &cfg));
                if v0.is_finite() {
                    worst_drop = worst_drop.max((v0 - v1) / v0.abs().max(1.0));
                }
            }
        }
        if eq.converged && i < 10 {
            let gb = cfg.utility_scale() * cfg.home_calls();
            for j in 0..2 {
                let opp = OpponentPoint::of(&eq.profile, 1 - j);
                let now = smooth_objective(j, &eq.profile, &cfg);
                let budget = policy.budget(&cfg, j);
                for a in 0..50 {
                    let s1 = budget * (a as f64 + 0.5) / 50.0;
                    for c in 0..50 {
                        let f = gb * budget.sqrt() * (c as f64 + 0.5) / 50.0;
                        worst_gain = worst_gain.max(smooth_objective_at([s1, budget - s1], f, &opp, &cfg) - now);
                    }
                }
            }
        }
    }
    if worst_drop > 1e-9 {
        failures.push("monotone improvement");
    }
    if worst_gain >= 10.0 * 1e-3 {
        failures.push("epsilon-Nash");
    }

    // Viete residuals.
    let mut viete: f64 = 0.0;
    let mut rng = run_rng(9, 0);
    for _ in 0..1000 {
        let a: f64 = 10f64.powf(rng.random_range(-3.0..4.0));
        let b = rng.random_range(-1.0..=1.0) * 2.0 * (a * a * a / 27.0).sqrt();
        for t in viete_roots(a, b).unwrap() {
            viete = viete.max((t * t * t - a * t - b).abs() / a.powf(1.5).max(1.0));
        }
    }
    if viete > 1e-8 {
        failures.push("viete");
    }

    // Brute-force dominance of the best response.
    let options = BestResponseOptions::default();
    let mut dominated = 0;
    for i in 0..200 {
        let mut rng = run_rng(2024, i);
        let inst = ranges.sample(&mut rng);
        let (cfg, policy) = ranges.market(&inst).unwrap();
        let j = (i % 2) as usize;
        let gb = cfg.utility_scale() * cfg.home_calls();
        let ob = policy.budget(&cfg, 1 - j);
        let split: f64 = rng.random_range(0.05..0.95);
        let used: f64 = rng.random_range(0.5..1.0);
        let os = [ob * used * split, ob * used * (1.0 - split)];
        let of = rng.random_range(0.0..0.8) * gb * os[0].min(os[1]).sqrt();
        let mut rows = [[0.0; 2]; 2];
        let mut fees = [0.0; 2];
        rows[1 - j] = os;
        fees[1 - j] = of;
        let profile = StrategyProfile::two_by_two(rows, fees).unwrap();
        let br = best_response_provider(j, &profile, &policy, &cfg, &options).unwrap();
        let opp = OpponentPoint { spend: os, fee: of };
        let xi_j = policy.grant(j);
        let fmax = gb * xi_j.sqrt();
        let mut best = f64::NEG_INFINITY;
        for a in 0..200 {
            let s1 = xi_j * (a as f64 + 0.5) / 200.0;
            for c in 0..200 {
                best = best.max(smooth_objective_at([s1, xi_j - s1], fmax * (c as f64 + 0.5) / 200.0, &opp, &cfg));
            }
        }
        let got = smooth_objective_at(br.spend, br.fee, &opp, &cfg);
        if got < best - 1e-4 * best.abs() {
            dominated += 1;
        }
    }
    if dominated > 0 {
        failures.push("dominance");
    }

    let secs = start.elapsed().as_secs_f64();
    if secs >= 300.0 {
        failures.push("runtime");
    }
    let detail = format!(
        "simplex {simplex:.1e}, conservation {conserve:.1e}, alpha {alpha_gap:.1e}, drop {worst_drop:.1e}, \
         grid gain {worst_gain:.1e}, viete {viete:.1e}, dominated {dominated}/200 ({secs:.1}s){}",
        if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
    );
    outcome(failures.is_empty(), detail)
}

fn figure_shapes(fig3a: &Table, fig4: &Table, fig6a: &Table, fig6b: &Table) -> Outcome {
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let fig4_ok = increasing(&col(fig4, "s11")) && increasing(&col(fig4, "s21")) && col(fig4, "n1").len() == 15;
    let (o1, o2) = (col(fig3a, "obj1"), col(fig3a, "obj2"));
    let fig3a_ok = o1.windows(2).all(|w| w[1] >= w[0]) && o2.windows(2).all(|w| w[1] <= w[0]);
    let spreads = [
        relative_spread(&col(fig6a, "f1")),
        relative_spread(&col(fig6a, "f2")),
        relative_spread(&col(fig6b, "f1")),
        relative_spread(&col(fig6b, "f2")),
    ];
    let fig6_ok = spreads.iter().all(|&s| s <= 0.05) && col(fig6a, "n1").len() == 15 && col(fig6b, "n2").len() == 15;
    outcome(
        fig4_ok && fig3a_ok && fig6_ok,
        format!(
            "fig4 increasing: {fig4_ok}, fig3a monotone: {fig3a_ok}, fig6 fee spreads f1/f2 over n1 {:.1}%/{:.1}%, over n2 {:.1}%/{:.1}%",
            100.0 * spreads[0],
            100.0 * spreads[1],
            100.0 * spreads[2],
            100.0 * spreads[3]
        ),
    )
}

fn symmetric_government_optimum() -> Outcome {
    let cfg = MarketConfig::two_by_two(60, 60, 30.0, 0.05, 1000.0).unwrap();
    let r = sweep(&cfg, 19, 1e-9, MAX_ITER).unwrap();
    let step = 50.0;
    let pass = (r.xi_star.0 - 500.0).abs() <= step / 2.0 && (r.xi_star.1 - 500.0).abs() <= step / 2.0;
    let mid = r.welfare[9].unwrap();
    outcome(
        pass,
        format!(
            "xi* = ({}, {}), welfare there {:.2} vs {mid:.2} at the even split",
            r.xi_star.0,
            r.xi_star.1,
            r.max_welfare()
        ),
    )
}

fn main() {
    let fixed = ExperimentConfig::fixed_parameters();
    let figure = |id: FigureId, cfg: &ExperimentConfig| generate(id, cfg, MAX_ITER).unwrap();
    let fig3a = figure(FigureId::Fig3a, &fixed);
    let fig3b = figure(FigureId::Fig3b, &fixed);
    let fig5a = figure(FigureId::Fig5a, &fixed);
    let fig10 = figure(FigureId::Fig10, &fixed);
    let fig4 = figure(FigureId::Fig4, &FigureId::Fig4.default_config());
    let fig6a = figure(FigureId::Fig6a, &FigureId::Fig6a.default_config());
    let fig6b = figure(FigureId::Fig6b, &FigureId::Fig6b.default_config());

    let results = [
        ("1 table2 reproduction", table2_reproduction()),
        ("2 monte-carlo statistics", monte_carlo_statistics()),
        ("3 closed-form fidelity", closed_form_fidelity(&fig3b, &fig5a)),
        ("4 fee formula exactness", theorem_exactness()),
        ("5 branch selection", branch_selection(&fig10)),
        ("6 invariant suite", invariant_suite()),
        ("7 figure shapes", figure_shapes(&fig3a, &fig4, &fig6a, &fig6b)),
        ("gov symmetric optimum", symmetric_government_optimum()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        println!("{} {name}: {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
        if !r.pass {
            failed += 1;
        }
    }
    println!("{}/{} criteria pass", results.len() - failed, results.len());
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
