use super::*;
use crate::objectives::{Objective, PlantedQuadratic};
use crate::subspace::DEFAULT_RANK_THRESHOLD;

/// `-|theta - c|^2` in a handful of dimensions, cheap and strictly concave.
struct Bowl {
    center: Vec<f64>,
}

impl Objective for Bowl {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        -theta.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }
    fn supports_gradient(&self) -> bool {
        true
    }
    fn gradient_unchecked(&self, theta: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        Ok(theta.iter().zip(&self.center).map(|(a, b)| -2.0 * (a - b)).collect())
    }
}

struct Failing;

impl Objective for Failing {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, _theta: &[f64]) -> f64 {
        f64::NAN
    }
}

fn small_config() -> SearchConfig {
    SearchConfig {
        rank: 3,
        inner_iterations: 4,
        context_size: 5,
        pool_size: 32,
        radius: 0.1,
        sigma: 0.05,
        warmup: 10,
        period: 20,
        window: 4,
        rank_threshold: DEFAULT_RANK_THRESHOLD,
    }
}

fn window_of(cols: &[Vec<f64>]) -> GradientWindow {
    let mut w = GradientWindow::new(cols[0].len(), cols.len()).unwrap();
    for c in cols {
        w.push(c).unwrap();
    }
    w
}

fn identity_window(dim: usize) -> GradientWindow {
    window_of(
        &(0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect::<Vec<_>>(),
    )
}

#[test]
fn default_hyperparameters() {
    let c = SearchConfig::default();
    assert_eq!(
        (c.rank, c.inner_iterations, c.context_size, c.pool_size),
        (15, 16, 16, 256)
    );
    assert_eq!((c.radius, c.sigma), (0.01, 0.005));
    assert_eq!((c.warmup, c.period), (150_000, 10_000));
    assert_eq!(c.round_budget(), 32);
}

#[test]
fn invalid_config_is_rejected() {
    let mut c = small_config();
    c.radius = 0.0;
    assert!(GlobalSearch::new(c, SurrogateKind::default()).is_err());
    let mut c = small_config();
    c.pool_size = 0;
    assert!(GlobalSearch::new(c, SurrogateKind::default()).is_err());
}

#[test]
fn init_context_center_only() {
    let obj = Bowl { center: vec![1.0, 2.0, 3.0] };
    let search = GlobalSearch::new(
        SearchConfig {
            context_size: 1,
            ..small_config()
        },
        SurrogateKind::default(),
    )
    .unwrap();
    let anchor = ParameterVector::new(vec![0.5, 0.5, 0.5]).unwrap();
    let basis = build_basis(&identity_window(3), anchor.clone(), 3, DEFAULT_RANK_THRESHOLD).unwrap();
    let mut ev = Evaluator::new(&obj, 0);
    let ctx = search.init_context(&basis, &mut ev, &mut RngStream::new(1)).unwrap();
    assert_eq!(ctx.len(), 1);
    assert_eq!(ctx.entries()[0].z, vec![0.0; 3]);
    assert_eq!(ctx.entries()[0].y, obj.value(&anchor));
    assert_eq!(ev.count(), 1);
}

#[test]
fn init_context_starts_at_anchor() {
    let obj = Bowl { center: vec![0.0; 4] };
    let search = GlobalSearch::new(
        SearchConfig {
            context_size: 16,
            ..small_config()
        },
        SurrogateKind::default(),
    )
    .unwrap();
    let basis = build_basis(&identity_window(4), ParameterVector::zeros(4), 3, DEFAULT_RANK_THRESHOLD).unwrap();
    let mut ev = Evaluator::new(&obj, 0);
    let ctx = search.init_context(&basis, &mut ev, &mut RngStream::new(1)).unwrap();
    assert_eq!(ctx.len(), 16);
    assert_eq!(ev.count(), 16);
    assert_eq!(ctx.entries()[0].z, vec![0.0; 3]);
    assert!(ev.events().iter().all(|e| e.phase == Phase::RoundInit));
}

#[test]
fn zero_sigma_context_is_all_anchor() {
    let obj = Bowl { center: vec![1.0, 0.0] };
    let search = GlobalSearch::new(
        SearchConfig {
            context_size: 3,
            sigma: 0.0,
            ..small_config()
        },
        SurrogateKind::default(),
    )
    .unwrap();
    let basis = build_basis(&identity_window(2), ParameterVector::zeros(2), 2, DEFAULT_RANK_THRESHOLD).unwrap();
    let mut ev = Evaluator::new(&obj, 0);
    let ctx = search.init_context(&basis, &mut ev, &mut RngStream::new(1)).unwrap();
    assert!(ctx.entries().iter().all(|e| e.z == vec![0.0, 0.0] && e.y == -1.0));
    let (xs, ys) = ctx.merged();
    assert_eq!((xs.len(), ys), (1, vec![-1.0]));
}

#[test]
fn degenerate_inner_iteration() {
    let obj = Bowl { center: vec![1.0, 0.0] };
    let search = GlobalSearch::new(
        SearchConfig {
            sigma: 0.0,
            ..small_config()
        },
        SurrogateKind::default(),
    )
    .unwrap();
    let basis = build_basis(&identity_window(2), ParameterVector::zeros(2), 2, DEFAULT_RANK_THRESHOLD).unwrap();
    let mut ctx = ContextSet::new(2);
    ctx.push(vec![0.0, 0.0], 5.0).unwrap();
    let mut ev = Evaluator::new(&obj, 0);
    let rec = search
        .inner_iteration(&mut ctx, &basis, &mut ev, &mut RngStream::new(2), None)
        .unwrap();
    assert_eq!(rec.z, vec![0.0, 0.0]);
    assert_eq!(ctx.len(), 2);
    assert_eq!(ev.count(), 1);
    assert_eq!(ev.events()[0].phase, Phase::RoundInner);
}

#[test]
fn oracle_surrogate_picks_true_pool_maximum() {
    struct Check {
        ok: bool,
    }
    impl PoolObserver for Check {
        fn observe(&mut self, view: PoolView<'_>) {
            let truth: Vec<f64> = view
                .pool
                .iter()
                .map(|z| view.space.objective.value(&view.space.basis.lift(z).unwrap()))
                .collect();
            let best = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            self.ok &= truth[view.chosen] == best;
        }
    }
    let obj = Bowl { center: vec![0.3, -0.2, 0.1] };
    let search = GlobalSearch::new(small_config(), SurrogateKind::Oracle).unwrap();
    let mut check = Check { ok: true };
    let mut ev = Evaluator::new(&obj, 0);
    let out = search
        .run_round_observed(
            &ParameterVector::zeros(3),
            &identity_window(3),
            &mut ev,
            &mut RngStream::new(3),
            &mut check,
        )
        .unwrap();
    assert!(check.ok);
    let mut best = f64::NEG_INFINITY;
    for (i, e) in out.trace.context.entries().iter().enumerate() {
        best = best.max(e.y);
        if i >= search.config.context_size {
            // incumbent never decreases
            assert!(best >= out.trace.y0);
        }
    }
}

#[test]
fn round_accounting_and_anchor_safety() {
    let q = PlantedQuadratic::new(40, 4, &[-1.0; 4], 9).unwrap();
    let anchor = ParameterVector::new(vec![0.05; 40]).unwrap();
    let mut w = GradientWindow::new(40, 8).unwrap();
    let mut probe = anchor.clone();
    for k in 0..8 {
        let g = q.gradient(&probe).unwrap();
        w.push(&g).unwrap();
        probe.add_scaled(0.01 * (k as f64 + 1.0), &g).unwrap();
    }
    for kind in [SurrogateKind::default(), SurrogateKind::Ridge { lambda: 1e-6 }, SurrogateKind::Oracle] {
        let search = GlobalSearch::new(SearchConfig::default(), kind).unwrap();
        let mut ev = Evaluator::new(&q, 1);
        let out = search.run_round(&anchor, &w, &mut ev, &mut RngStream::new(4)).unwrap();
        assert_eq!(ev.count(), 32);
        assert_eq!(out.trace.rollout_count, 32);
        assert_eq!(out.trace.iterations.len(), 16);
        assert_eq!(out.trace.anchor_value, Some(q.value(&anchor)));
        assert!(out.trace.y_best >= out.trace.anchor_value.unwrap());
        assert_eq!(q.value(&out.theta), out.trace.y_best);
        for it in &out.trace.iterations {
            assert_eq!(it.delta, it.actual - out.trace.y0);
        }

        let mut ev = Evaluator::new(&q, 1);
        let one = search.one_shot_round(&anchor, &w, &mut ev, &mut RngStream::new(4)).unwrap();
        assert_eq!((ev.count(), one.trace.rollout_count), (17, 17));

        let mut ev = Evaluator::new(&q, 1);
        let rnd = search.random_round(&anchor, &w, &mut ev, &mut RngStream::new(4)).unwrap();
        assert_eq!((ev.count(), rnd.trace.rollout_count), (32, 32));
        assert!(rnd.trace.iterations.is_empty());
    }
}

#[test]
fn one_shot_equals_single_iteration_round() {
    let obj = Bowl { center: vec![0.3, -0.2, 0.1] };
    let one = GlobalSearch::new(small_config(), SurrogateKind::default()).unwrap();
    let full_t1 = GlobalSearch::new(
        SearchConfig {
            inner_iterations: 1,
            ..small_config()
        },
        SurrogateKind::default(),
    )
    .unwrap();
    let w = identity_window(3);
    let a = one
        .one_shot_round(&ParameterVector::zeros(3), &w, &mut Evaluator::new(&obj, 5), &mut RngStream::new(6))
        .unwrap();
    let b = full_t1
        .run_round(&ParameterVector::zeros(3), &w, &mut Evaluator::new(&obj, 5), &mut RngStream::new(6))
        .unwrap();
    assert_eq!(a.theta, b.theta);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn zero_iterations_returns_best_initial() {
    let obj = Bowl { center: vec![0.3, -0.2, 0.1] };
    let search = GlobalSearch::new(
        SearchConfig {
            inner_iterations: 0,
            ..small_config()
        },
        SurrogateKind::default(),
    )
    .unwrap();
    let mut ev = Evaluator::new(&obj, 0);
    let out = search
        .run_round(&ParameterVector::zeros(3), &identity_window(3), &mut ev, &mut RngStream::new(1))
        .unwrap();
    assert_eq!(ev.count(), 5);
    assert!(out.trace.iterations.is_empty());
    assert_eq!(out.trace.y_best, out.trace.y0);
}

#[test]
fn random_round_with_zero_sigma_returns_anchor() {
    let obj = Bowl { center: vec![0.3, -0.2, 0.1] };
    let search = GlobalSearch::new(
        SearchConfig {
            sigma: 0.0,
            ..small_config()
        },
        SurrogateKind::default(),
    )
    .unwrap();
    let anchor = ParameterVector::new(vec![0.1, 0.2, 0.3]).unwrap();
    let out = search
        .random_round(&anchor, &identity_window(3), &mut Evaluator::new(&obj, 0), &mut RngStream::new(1))
        .unwrap();
    assert_eq!(out.theta, anchor);
}

#[test]
fn degenerate_history_skips_round() {
    let obj = Bowl { center: vec![0.0; 3] };
    let search = GlobalSearch::new(small_config(), SurrogateKind::default()).unwrap();
    let anchor = ParameterVector::new(vec![0.1, 0.2, 0.3]).unwrap();
    let zero = window_of(&[vec![0.0; 3]]);
    let mut ev = Evaluator::new(&obj, 0);
    let out = search.run_round(&anchor, &zero, &mut ev, &mut RngStream::new(1)).unwrap();
    assert!(out.trace.is_skipped());
    assert_eq!(out.theta, anchor);
    assert_eq!(ev.count(), 0);
}

#[test]
fn objective_failure_names_candidate() {
    let search = GlobalSearch::new(small_config(), SurrogateKind::default()).unwrap();
    let err = search
        .run_round(
            &ParameterVector::zeros(2),
            &identity_window(2),
            &mut Evaluator::new(&Failing, 0),
            &mut RngStream::new(1),
        )
        .unwrap_err();
    assert!(matches!(
        err,
        SearchError::Objective {
            phase: Phase::RoundInit,
            candidate: 0,
            ..
        }
    ));
}

#[test]
fn failing_remote_falls_back_to_idw() {
    use crate::surrogate::{RemoteClient, RemoteSurrogate};
    use std::io::Cursor;
    let client = RemoteClient::from_streams(Box::new(Cursor::new(Vec::new())), Box::new(std::io::sink()));
    let search = GlobalSearch::new(small_config(), SurrogateKind::Remote(RemoteSurrogate::new(client))).unwrap();
    let obj = Bowl { center: vec![0.3, -0.2, 0.1] };
    let mut ev = Evaluator::new(&obj, 0);
    let out = search
        .run_round(&ParameterVector::zeros(3), &identity_window(3), &mut ev, &mut RngStream::new(1))
        .unwrap();
    assert!(out.trace.iterations.iter().all(|it| it.fallback));
    assert_eq!(ev.count(), 9);
}

#[test]
fn ranking_invariant_under_monotone_transform() {
    // same argmax whether predictions are y or exp(y)
    let preds = [0.1, -2.0, 3.5, 3.4, 0.0];
    let mapped: Vec<f64> = preds.iter().map(|p: &f64| p.exp() * 7.0 + 1.0).collect();
    assert_eq!(argmax(&preds), argmax(&mapped));
}

fn run(method: Method, budget: u64, cfg: SearchConfig, seed: u64) -> TrainingTrace {
    let obj = PlantedQuadratic::new(30, 3, &[-1.0, -0.5, -0.25], 2).unwrap();
    let search = GlobalSearch::new(cfg, SurrogateKind::default()).unwrap();
    interleave(
        &search,
        RunSpec { method, budget, seed },
        &obj,
        &mut GradientAscent { learning_rate: 0.05 },
        ParameterVector::zeros(30),
        None,
    )
    .unwrap()
}

#[test]
fn warmup_beyond_budget_means_local_only() {
    let cfg = SearchConfig {
        warmup: 1_000,
        ..small_config()
    };
    let t = run(Method::Full, 200, cfg, 0);
    assert!(t.rounds.is_empty());
    assert_eq!(t.events.len(), 200);
    assert!(t.events.iter().all(|e| e.phase == Phase::Local));
}

#[test]
fn trigger_points_follow_period() {
    let cfg = small_config(); // warmup 10, period 20, round cost 9
    let cost = cfg.round_budget() as u64;
    let budget = cfg.warmup + 2 * cfg.period + 1;
    let t = run(Method::Full, budget, cfg.clone(), 0);
    let triggers: Vec<u64> = t.rounds.iter().map(|r| r.trigger).collect();
    assert_eq!(triggers, vec![10, 30, 50]);
    // the last one fires with a single evaluation left
    assert_eq!(t.rounds.iter().filter(|r| r.executed).count(), 2);
    assert_eq!(t.events.len() as u64, budget);

    let t = run(Method::Full, cfg.warmup + 2 * cfg.period + cost, cfg, 0);
    assert_eq!(t.rounds.iter().filter(|r| r.executed).count(), 3);
    assert_eq!(t.events.len() as u64, 10 + 40 + cost);
}

#[test]
fn budget_is_exact_for_every_method() {
    for method in Method::ALL {
        let t = run(method, 157, small_config(), 3);
        assert_eq!(t.events.len(), 157, "{method}");
        let round_evals: usize = t.executed_rounds().map(|r| r.rollout_count).sum();
        assert_eq!(t.local_steps as usize + round_evals, 157, "{method}");
        let per_round = method.round_budget(&GlobalSearch::new(small_config(), SurrogateKind::default()).unwrap());
        for r in t.executed_rounds() {
            assert_eq!(Some(r.rollout_count as u64), per_round);
        }
        for (i, e) in t.events.iter().enumerate() {
            assert_eq!(e.index, i as u64);
        }
    }
}

#[test]
fn next_local_phase_starts_from_round_result() {
    let cfg = small_config();
    let t = run(Method::Full, cfg.warmup + cfg.round_budget() as u64 + 1, cfg.clone(), 1);
    let round = t.executed_rounds().next().unwrap();
    let after = &t.events[(cfg.warmup as usize) + cfg.round_budget()];
    assert_eq!(after.phase, Phase::Local);
    assert_eq!(after.value, round.y_best);
}

#[test]
fn interleave_is_deterministic() {
    let a = run(Method::Full, 120, small_config(), 8);
    let b = run(Method::Full, 120, small_config(), 8);
    assert_eq!(a.events, b.events);
    assert_eq!(a.final_theta, b.final_theta);
    let c = run(Method::Full, 120, small_config(), 9);
    assert_ne!(a.events, c.events);
}

#[test]
fn adam_first_step_is_sign_scaled() {
    let mut adam = Adam::new(0.1);
    let mut theta = ParameterVector::zeros(3);
    adam.step(&mut theta, &[2.0, -0.5, 0.0]).unwrap();
    assert!((theta[0] - 0.1).abs() < 1e-6);
    assert!((theta[1] + 0.1).abs() < 1e-6);
    assert_eq!(theta[2], 0.0);
    assert!(adam.step(&mut theta, &[1.0]).is_err());
}

#[test]
fn adam_climbs_a_bowl() {
    let bowl = Bowl {
        center: vec![1.0, -1.0],
    };
    let mut adam = Adam::new(0.05);
    let mut theta = ParameterVector::zeros(2);
    for _ in 0..500 {
        let g = bowl.gradient(&theta).unwrap();
        adam.step(&mut theta, &g).unwrap();
    }
    assert!(bowl.value(&theta) > -1e-3);
}
