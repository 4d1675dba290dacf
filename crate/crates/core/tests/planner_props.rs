use proptest::prelude::*;
use ras_core::planner::{cost_terms, CandidateList};
use ras_core::risk::{build_corridor, is_safe};
use ras_core::{
    Aabb, Direction, LocalPlanner, ParticleField, PlanRequest, PlanResult, PlannerConfig, QuadState, RiskConfig,
    SamplerConfig, Vec3, Vec3d, WeightedParticle,
};

fn bounds() -> Aabb<f64> {
    Aabb::new(Vec3::new(-4.0, -6.0, -2.0), Vec3::new(12.0, 6.0, 4.0))
}

fn planar() -> SamplerConfig<f64> {
    SamplerConfig { n_elevation: 1, coarse_counts: Some((7, 1)), ..Default::default() }
}

fn planner(cfg: PlannerConfig<f64>, sampler: SamplerConfig<f64>) -> LocalPlanner<f64> {
    LocalPlanner::new(cfg, sampler, RiskConfig::default()).unwrap()
}

fn request() -> PlanRequest<f64> {
    PlanRequest {
        start: QuadState::at_rest(Vec3::new(0.0, 0.0, 1.0)),
        start_time: 0.0,
        goal: Vec3::new(10.0, 0.0, 1.0),
        theta_last: Direction::new(0.0, 0.0),
    }
}

/// Static particles on a regular grid filling the box `[lo, hi]`.
fn block(lo: Vec3d, hi: Vec3d, step: f64, weight: f64) -> Vec<WeightedParticle<f64>> {
    let n = |a: f64, b: f64| ((b - a) / step).round() as usize;
    let mut out = Vec::new();
    for i in 0..=n(lo.x, hi.x) {
        for j in 0..=n(lo.y, hi.y) {
            for k in 0..=n(lo.z, hi.z) {
                let p = Vec3::new(lo.x + step * i as f64, lo.y + step * j as f64, lo.z + step * k as f64);
                out.push(WeightedParticle::new_static(p, weight));
            }
        }
    }
    out
}

fn field(ps: Vec<WeightedParticle<f64>>) -> ParticleField<f64> {
    ParticleField::from_particles(ps, bounds(), 0.5, 0.0).unwrap()
}

/// Phase-1 risk without any index: every particle against every cuboid.
fn oracle_risk1(f: &ParticleField<f64>, p: &LocalPlanner<f64>, m: &ras_core::MotionPrimitive<f64>) -> f64 {
    let (w1, _) = m.local_windows();
    let corridor = build_corridor(&m.segment, w1, &p.risk, Some(m.direction.unit())).unwrap();
    let offset = m.t0 - f.snapshot_time();
    let mut total = 0.0;
    for seg in &corridor {
        let b = seg.as_box();
        let mut s = 0.0;
        for q in f.particles() {
            if b.contains(&q.predicted_position((offset + seg.t_start).max(0.0))) {
                s += q.weight;
            }
        }
        total += s;
    }
    total
}

fn check_found_plan(f: &ParticleField<f64>, p: &LocalPlanner<f64>, plan: &PlanResult<f64>) {
    assert!(plan.is_found());
    assert_eq!(plan.pieces.len(), p.planner.pieces);
    assert_eq!(plan.trajectory.segments.len(), p.planner.pieces);
    assert!(plan.trajectory.max_junction_residual() < 1e-9);
    for c in &plan.pieces {
        assert!(is_safe(oracle_risk1(f, p, &c.primitive), p.planner.delta));
    }
    for w in plan.pieces.windows(2) {
        assert_eq!(w[1].primitive.t0, w[0].primitive.tp);
        assert!(w[1].primitive.start_state().max_abs_diff(&w[0].primitive.junction_state) < 1e-9);
    }
}

#[test]
fn empty_field_goes_straight_to_the_goal() {
    let p = planner(PlannerConfig::default(), SamplerConfig::default());
    let f = field(Vec::new());
    let plan = p.plan(&f, &request(), None);
    check_found_plan(&f, &p, &plan);
    for c in &plan.pieces {
        assert!(c.primitive.direction.azimuth.abs() < 1e-12 && c.primitive.direction.elevation.abs() < 1e-12);
        assert_eq!(c.risk1 + c.risk2, 0.0);
    }
    assert_eq!(plan.diagnostics.erase_events, 0);
}

#[test]
fn phase_two_risk_decides_between_safe_candidates() {
    // two directions at +-30 degrees, both clear in Phase 1; one obstacle
    // sits in the Phase 2 of the -30 degree primitive, another off both paths
    let sampler = SamplerConfig {
        n_elevation: 1,
        coarse_counts: Some((2, 1)),
        azimuth_span: 60f64.to_radians(),
        ..Default::default()
    };
    let cfg = PlannerConfig { pieces: 1, ..Default::default() };
    let p = planner(cfg, sampler);
    let scene = |mirror: f64| {
        let o1 = Vec3::new(1.3, -0.75 * mirror, 1.0);
        let o2 = Vec3::new(0.4, 1.2 * mirror, 1.0);
        let h = Vec3::from([0.1; 3]);
        let mut ps = block(o1 - h, o1 + h, 0.05, 0.02);
        ps.extend(block(o2 - h, o2 + h, 0.05, 0.02));
        field(ps)
    };
    for mirror in [1.0, -1.0] {
        let f = scene(mirror);
        let plan = p.plan(&f, &request(), None);
        check_found_plan(&f, &p, &plan);
        let chosen = &plan.pieces[0];
        assert!((chosen.primitive.direction.azimuth - mirror * 30f64.to_radians()).abs() < 1e-12);
        let fan = p.evaluate_fan(&f, 0.0, &request().start, 0.0, &request().goal, &request().theta_last, true, None);
        assert_eq!(fan.len(), 2);
        let other = fan.iter().find(|c| c.primitive.grid_index != chosen.primitive.grid_index).unwrap();
        assert!(is_safe(other.risk1, p.planner.delta) && is_safe(chosen.risk1, p.planner.delta));
        assert!(other.risk2 > chosen.risk2);
    }
}

fn wall() -> ParticleField<f64> {
    field(block(Vec3::new(0.8, -0.3, 0.7), Vec3::new(0.9, 0.3, 1.3), 0.05, 0.05))
}

#[test]
fn one_phase_costs_backtrack_at_a_wall() {
    let cfg = PlannerConfig { use_phase2_risk: false, ..Default::default() };
    let p = planner(cfg, planar());
    let f = wall();
    let plan = p.plan(&f, &request(), None);
    assert!(plan.diagnostics.erase_events >= 1, "{:?}", plan.diagnostics);
    check_found_plan(&f, &p, &plan);
    assert!(plan.pieces[0].primitive.direction.azimuth.abs() > 1e-9);
    assert!(plan.diagnostics.selections <= plan.diagnostics.candidates_evaluated);
}

#[test]
fn phase_two_risk_avoids_the_wall_without_backtracking() {
    let p = planner(PlannerConfig::default(), planar());
    let f = wall();
    let plan = p.plan(&f, &request(), None);
    check_found_plan(&f, &p, &plan);
    assert_eq!(plan.diagnostics.erase_events, 0);
}

#[test]
fn sealed_start_freezes() {
    let p = planner(PlannerConfig::default(), SamplerConfig::default());
    let s = request().start.position;
    let ps: Vec<_> = block(s - Vec3::from([0.8; 3]), s + Vec3::from([0.8; 3]), 0.1, 0.5)
        .into_iter()
        .filter(|q| (0.2..=0.8).contains(&q.position.distance(&s)))
        .collect();
    let f = field(ps);
    let plan = p.plan(&f, &request(), None);
    assert!(!plan.is_found());
    assert!(plan.trajectory.is_empty());
    let fan = p.evaluate_fan(&f, 0.0, &request().start, 0.0, &request().goal, &request().theta_last, true, None);
    assert!(!fan.is_empty());
    assert_eq!(CandidateList::admit(fan, p.planner.delta).remaining(), 0);
}

#[test]
fn replan_tick_rules() {
    let p = planner(PlannerConfig::default(), SamplerConfig::default());
    let f = field(block(Vec3::new(3.0, -2.0, 0.5), Vec3::new(3.2, -1.5, 1.5), 0.1, 0.1));
    let req = request();
    let plan = p.plan(&f, &req, None);
    check_found_plan(&f, &p, &plan);
    let first = &plan.pieces[0].primitive;

    // unchanged field: piece 1 kept bit for bit, piece 2 re-selected identically
    let now = first.t0 + 0.3 * (first.tp - first.t0);
    let again = p.replan_tick(&plan, &f, now, &req.goal, None);
    assert_eq!(again.pieces[0], plan.pieces[0]);
    assert_eq!(again.pieces[1], plan.pieces[1]);
    assert!(!again.diagnostics.intrusion);

    // intrusion on the rest of piece 1's Phase 1
    let at = first.segment.state_at(0.8 * first.phase1_duration()).position;
    let mut ps = f.particles().to_vec();
    ps.extend(block(at - Vec3::from([0.1; 3]), at + Vec3::from([0.1; 3]), 0.05, 0.1));
    let intruded = field(ps);
    let re = p.replan_tick(&plan, &intruded, now, &req.goal, None);
    assert!(re.diagnostics.intrusion);
    if re.is_found() {
        check_found_plan(&intruded, &p, &re);
        let start = re.pieces[0].primitive.start_state();
        assert!(start.max_abs_diff(&first.segment.state_at(now - first.t0)) < 1e-9);
    }

    // past the junction: piece 2 moves up
    let shifted = p.replan_tick(&plan, &f, first.tp + 1e-3, &req.goal, None);
    assert_eq!(shifted.pieces[0], plan.pieces[1]);
    check_found_plan(&f, &p, &shifted);
}

#[test]
fn plans_are_deterministic() {
    let p = planner(PlannerConfig::default(), SamplerConfig::default());
    let f = wall();
    let a = p.plan(&f, &request(), None);
    let b = p.plan(&f, &request(), None);
    assert_eq!(a.pieces, b.pieces);
    assert_eq!(a.trajectory, b.trajectory);
}

fn clusters() -> impl Strategy<Value = Vec<WeightedParticle<f64>>> {
    let cluster = (0.5f64..5.0, -2.0f64..2.0, 0.5f64..1.5, -1.0f64..1.0, -1.0f64..1.0, any::<bool>(), any::<u64>());
    prop::collection::vec(cluster, 0..8).prop_map(|cs| {
        let mut out = Vec::new();
        for (x, y, z, vx, vy, dynamic, seed) in cs {
            let mut s = seed;
            for _ in 0..20 {
                // small deterministic scatter around the cluster centre
                s = s.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
                let r = |k: u32| (((s >> (k * 16)) & 0xffff) as f64 / 65535.0 - 0.5) * 0.4;
                let p = Vec3::new(x + r(0), y + r(1), z + r(2));
                out.push(if dynamic {
                    WeightedParticle::new_dynamic(p, Vec3::new(vx, vy, 0.0), 0.05)
                } else {
                    WeightedParticle::new_static(p, 0.05)
                });
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn found_plans_are_sound_and_argmin(ps in clusters(), k in 1usize..4) {
        let p = planner(PlannerConfig { pieces: k, ..Default::default() }, SamplerConfig::default());
        let f = field(ps);
        let req = request();
        let plan = p.plan(&f, &req, None);
        let d = &plan.diagnostics;
        prop_assert!(d.selections <= d.candidates_evaluated);
        if !plan.is_found() {
            return Ok(());
        }
        check_found_plan(&f, &p, &plan);
        if d.erase_events == 0 {
            // every piece is the minimum of its own fan
            let mut start = (req.start, req.start_time, req.theta_last);
            for (i, c) in plan.pieces.iter().enumerate() {
                let fan = p.evaluate_fan(&f, 0.0, &start.0, start.1, &req.goal, &start.2, i == 0, None);
                let best = fan
                    .iter()
                    .filter(|x| x.risk1 < p.planner.delta)
                    .min_by(|a, b| {
                        a.cost.total.total_cmp(&b.cost.total)
                            .then(a.cost.turn.total_cmp(&b.cost.turn))
                            .then(a.primitive.grid_index.cmp(&b.primitive.grid_index))
                    })
                    .unwrap();
                prop_assert_eq!(best.primitive.grid_index, c.primitive.grid_index);
                start = (c.primitive.junction_state, c.primitive.tp, c.primitive.direction);
            }
        }
    }

    #[test]
    fn argmin_is_invariant_to_cost_scale(ps in clusters(), e in -3i32..4) {
        let p = planner(PlannerConfig::default(), SamplerConfig::default());
        let f = field(ps);
        let req = request();
        let fan = p.evaluate_fan(&f, 0.0, &req.start, 0.0, &req.goal, &req.theta_last, true, None);
        let c = 2f64.powi(e);
        let scaled_cfg = PlannerConfig { lambdas: p.planner.lambdas.map(|l| l * c), ..p.planner.clone() };
        let rescored: Vec<_> = fan
            .iter()
            .map(|x| {
                let mut y = x.clone();
                y.cost = cost_terms(&x.primitive, x.risk1, x.risk2, &req.goal, &req.theta_last, &scaled_cfg, 0.0);
                y
            })
            .collect();
        let a = CandidateList::admit(fan, p.planner.delta);
        let b = CandidateList::admit(rescored, p.planner.delta);
        prop_assert_eq!(
            a.best().map(|x| x.primitive.grid_index),
            b.best().map(|x| x.primitive.grid_index)
        );
        let order_a: Vec<_> = a.entries().iter().map(|x| x.primitive.grid_index).collect();
        let order_b: Vec<_> = b.entries().iter().map(|x| x.primitive.grid_index).collect();
        prop_assert_eq!(order_a, order_b);
    }
}
