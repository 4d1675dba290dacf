use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use proptest::prelude::*;
use ras_core::fusion::{closeness_cost, fused_cost, global_risk_check, select_key_points, try_merge};
use ras_core::planner::rank_cost;
use ras_core::sampler::primitive_fan;
use ras_core::trajectory::check_feasible_refined;
use ras_core::{
    Aabb, Direction, FusionConfig, GlobalPoint, GlobalTrajectory, LocalPlanner, Mode, ParticleField, PlannerConfig,
    QuadState, RiskConfig, SamplerConfig, Supervisor, Vec3, Vec3d, WeightedParticle,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn path_from(positions: &[Vec3d], dt: f64) -> GlobalTrajectory<f64> {
    let pts = positions
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let v = if i + 1 < positions.len() { (positions[i + 1] - *p) / dt } else { (*p - positions[i - 1]) / dt };
            GlobalPoint { time: dt * i as f64, position: *p, velocity: v, acceleration: Vec3::zeros() }
        })
        .collect();
    GlobalTrajectory::new(pts).unwrap()
}

fn line(n: usize, spacing: f64) -> Vec<Vec3d> {
    (0..n).map(|i| Vec3::new(spacing * i as f64, 0.0, 1.0)).collect()
}

#[test]
fn key_points_match_the_golden_files() {
    for name in ["straight", "l_shape", "sinusoid"] {
        let g: GlobalTrajectory<f64> =
            GlobalTrajectory::read(BufReader::new(File::open(fixture(&format!("{name}_path.txt"))).unwrap())).unwrap();
        let expect: Vec<usize> = std::fs::read_to_string(fixture(&format!("{name}_keys.txt")))
            .unwrap()
            .lines()
            .map(|l| l.trim().parse().unwrap())
            .collect();
        let key = select_key_points(&g, &FusionConfig::default()).unwrap();
        assert_eq!(key.indices, expect, "{name}");
        assert!(key.indices.windows(2).all(|w| w[1] - w[0] <= 21), "{name}");
    }
}

#[test]
fn key_point_examples() {
    let cfg = FusionConfig { max_gap: 1000, ..Default::default() };
    let g = path_from(&line(50, 0.1), 0.1);
    assert_eq!(select_key_points(&g, &cfg).unwrap().indices, vec![0, 4, 49]);

    let cfg = FusionConfig { max_gap: 5, ..Default::default() };
    let k = select_key_points(&g, &cfg).unwrap();
    let expect: Vec<usize> = [0].into_iter().chain((4..49).step_by(6)).chain([49]).collect();
    assert_eq!(k.indices, expect);

    // right angle at index 20
    let mut pts = line(21, 0.1);
    pts.extend((1..20).map(|i| Vec3::new(2.0, 0.1 * i as f64, 1.0)));
    let k = select_key_points(&path_from(&pts, 0.1), &FusionConfig::default()).unwrap();
    assert!(k.indices.contains(&20), "{:?}", k.indices);

    let short = path_from(&line(4, 0.1), 0.1);
    assert!(select_key_points(&short, &FusionConfig::default()).is_err());
}

#[test]
fn key_points_are_denser_on_curves() {
    // 5 m straight, then a 0.4 m radius arc, same spacing
    let mut pts = line(100, 0.05);
    let end = pts[99];
    let r = 0.4;
    pts.extend((1..=100).map(|i| {
        let a = 0.05 * i as f64 / r;
        Vec3::new(end.x + r * a.sin(), r - r * a.cos(), 1.0)
    }));
    let k = select_key_points(&path_from(&pts, 0.05), &FusionConfig::default()).unwrap();
    let straight = k.indices.iter().filter(|&&i| i < 99).count();
    let curved = k.indices.iter().filter(|&&i| i > 99).count();
    assert!(curved > straight, "{:?}", k.indices);
}

fn smooth_path() -> impl Strategy<Value = Vec<Vec3d>> {
    (10usize..400, prop::collection::vec((-2.0f64..2.0, 0.1f64..3.0, 0.0f64..6.3), 3), 0.02f64..0.2).prop_map(
        |(n, waves, step)| {
            (0..n)
                .map(|i| {
                    let s = step * i as f64;
                    let y: f64 = waves.iter().map(|(a, f, ph)| a * (f * s + ph).sin()).sum();
                    Vec3::new(s, y, 1.0 + 0.2 * (0.5 * s).sin())
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn key_point_invariants(pts in smooth_path(), gap in 1usize..40, deg in 1.0f64..60.0) {
        let cfg = FusionConfig { max_gap: gap, delta_theta: deg.to_radians(), ..Default::default() };
        let g = path_from(&pts, 0.1);
        if gap + 2 < cfg.second_index {
            prop_assert!(select_key_points(&g, &cfg).is_err());
            return Ok(());
        }
        let k = select_key_points(&g, &cfg).unwrap();
        prop_assert_eq!(k.indices[0], 0);
        prop_assert_eq!(*k.indices.last().unwrap(), pts.len() - 1);
        prop_assert!(k.indices.windows(2).all(|w| w[0] < w[1] && w[1] - w[0] <= gap + 1));
        prop_assert_eq!(k.points.len(), k.indices.len());
        for (p, &i) in k.points.iter().zip(&k.indices) {
            prop_assert_eq!(*p, pts[i]);
        }
    }

    #[test]
    fn merges_land_on_the_polyline(
        pts in smooth_path(),
        a in (-1.0f64..20.0, -3.0f64..3.0, 0.5f64..1.5),
        b in (-1.0f64..20.0, -3.0f64..3.0, 0.5f64..1.5),
    ) {
        let g = path_from(&pts, 0.1);
        let cfg = FusionConfig::default();
        let sampler = SamplerConfig::default();
        let key = select_key_points(&g, &cfg).unwrap();
        let start = QuadState::at_rest(Vec3::new(a.0, a.1, a.2));
        let end = Vec3::new(b.0, b.1, b.2);
        let Some(m) = try_merge((start.position, end), &key, &g, &start, 0.0, 0, 0, &cfg, &sampler) else {
            return Ok(());
        };
        prop_assert!(m.distance <= cfg.merge_distance);
        let (s0, s1) = (key.points[m.key_segment], key.points[m.key_segment + 1]);
        let u = (m.point - s0).dot(&(s1 - s0)) / (s1 - s0).norm_squared();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&u));
        prop_assert!(m.point.distance(&s0.lerp(&s1, u)) < 1e-9);
        // dense sampling of both segments never beats the reported distance
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            for s in 0..key.segment_count() {
                let p = start.position.lerp(&end, i as f64 / 200.0);
                for j in 0..=50 {
                    best = best.min(p.distance(&key.points[s].lerp(&key.points[s + 1], j as f64 / 50.0)));
                }
            }
        }
        prop_assert!(m.distance <= best + 1e-12);
        let seg = &m.primitive.segment;
        prop_assert!(seg.state_at(0.0).max_abs_diff(&start) < 1e-9);
        let gp = g.points()[m.global_index];
        prop_assert!(seg.end().max_abs_diff(&QuadState::new(m.point, gp.velocity, gp.acceleration)) < 1e-9);
        prop_assert!(check_feasible_refined(seg, sampler.v_max, sampler.a_max));
    }

    #[test]
    fn fused_cost_without_closeness_is_rank_cost(
        az in -3.0f64..3.0,
        risks in (0.0f64..2.0, 0.0f64..2.0),
        goal in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
        d in 0.0f64..5.0,
        w in (0.01f64..1.0, 0.01f64..1.0, 0.01f64..1.0),
    ) {
        let s = w.0 + w.1 + w.2;
        let planner = PlannerConfig { lambdas: [w.0 / s, w.1 / s, 1.0 - w.0 / s - w.1 / s, 0.0], ..Default::default() };
        let fusion = FusionConfig::default();
        let heading = Direction::new(az, 0.0).unit();
        let last = Direction::new(-az, 0.1);
        let goal = Vec3::new(goal.0, goal.1, goal.2);
        for m in primitive_fan(&QuadState::at_rest(Vec3::zeros()), 0.0, &heading, &SamplerConfig::default(), true) {
            prop_assert_eq!(
                fused_cost(&m, risks.0, risks.1, &goal, &last, d, &planner, &fusion),
                rank_cost(&m, risks.0, risks.1, &goal, &last, &planner)
            );
        }
    }
}

#[test]
fn merge_examples() {
    let cfg = FusionConfig::default();
    let sampler = SamplerConfig::default();
    let g = path_from(&line(60, 0.1), 0.1);
    let key = select_key_points(&g, &cfg).unwrap();

    // crossing 0.2 m above the path at x = 2
    let start = QuadState::at_rest(Vec3::new(1.0, -1.0, 1.2));
    let m = try_merge((start.position, Vec3::new(3.0, 1.0, 1.2)), &key, &g, &start, 0.0, 3, 0, &cfg, &sampler).unwrap();
    assert!((m.distance - 0.2).abs() < 1e-12);
    assert!(m.point.distance(&Vec3::new(2.0, 0.0, 1.0)) < 1e-12);
    assert_eq!(m.global_index, 20);
    assert_eq!(m.primitive.grid_index, 3);

    // parallel at twice the merge distance
    let start = QuadState::at_rest(Vec3::new(0.0, 1.0, 1.0));
    assert!(
        try_merge((start.position, Vec3::new(4.0, 1.0, 1.0)), &key, &g, &start, 0.0, 0, 0, &cfg, &sampler).is_none()
    );

    // global speed of 10 m/s cannot be matched
    let fast = path_from(&line(60, 1.0), 0.1);
    let key = select_key_points(&fast, &cfg).unwrap();
    let start = QuadState::at_rest(Vec3::new(20.0, -1.0, 1.0));
    assert!(try_merge((start.position, Vec3::new(20.0, 1.0, 1.0)), &key, &fast, &start, 0.0, 0, 0, &cfg, &sampler)
        .is_none());
}

#[test]
fn closeness_cost_examples() {
    assert_eq!(closeness_cost(0.5, 0.5), 0.0);
    assert_eq!(closeness_cost(1.5, 0.5), 1.0);
    assert_eq!(closeness_cost(0.0, 0.5), 0.0);
}

fn bounds() -> Aabb<f64> {
    Aabb::new(Vec3::new(-2.0, -6.0, -1.0), Vec3::new(14.0, 6.0, 3.0))
}

fn block(c: Vec3d, h: f64, step: f64, weight: f64) -> Vec<WeightedParticle<f64>> {
    let n = (2.0 * h / step).round() as usize;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let p = c - Vec3::from([h; 3]) + Vec3::new(i as f64, j as f64, k as f64) * step;
                out.push(WeightedParticle::new_static(p, weight));
            }
        }
    }
    out
}

#[test]
fn global_risk_examples() {
    // 1 m/s along x
    let g = path_from(&line(121, 0.1), 0.1);
    let cfg = FusionConfig::default();
    let risk = RiskConfig::default();
    let empty = ParticleField::from_particles(Vec::new(), bounds(), 0.5, 0.0).unwrap();
    assert_eq!(global_risk_check(&empty, &g, 0, &cfg, &risk, 0.0, true), 0.0);

    let ps = block(Vec3::new(1.0, 0.0, 1.0), 0.1, 0.05, 0.01);
    let total: f64 = ps.iter().map(|p| p.weight).sum();
    let f = ParticleField::from_particles(ps, bounds(), 0.5, 0.0).unwrap();
    assert!(global_risk_check(&f, &g, 0, &cfg, &risk, 0.0, true) >= total);

    // crosses x = 1 at t = 0, gone sideways well before the vehicle arrives
    let crosser = WeightedParticle::new_dynamic(Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 2.0, 0.0), 1.0);
    let f = ParticleField::from_particles(vec![crosser], bounds(), 0.5, 0.0).unwrap();
    assert_eq!(global_risk_check(&f, &g, 0, &cfg, &risk, 0.0, true), 0.0);
    assert!(global_risk_check(&f, &g, 0, &cfg, &risk, 0.0, false) > 0.0);
}

/// Ideal follower: the vehicle is wherever the last command says.
fn fly(obstacle: impl Fn(f64) -> Vec<WeightedParticle<f64>>, t_end: f64) -> (Supervisor<f64>, Vec<Vec3d>) {
    let g = path_from(&line(101, 0.1), 0.1);
    let planner = LocalPlanner::new(PlannerConfig::default(), SamplerConfig::default(), RiskConfig::default()).unwrap();
    let mut sup = Supervisor::new(planner, FusionConfig::default(), g.clone(), 0.0).unwrap();
    let mut state = g.points()[0].state();
    let mut cmd = None;
    let mut track = Vec::new();
    let dt = 0.05;
    for i in 0..(t_end / dt) as usize {
        let now = dt * i as f64;
        if let Some(c) = &cmd {
            if let Some(s) = ras_core::Command::state_at(c, &g, now) {
                state = s;
            }
        }
        let field = ParticleField::from_particles(obstacle(now), bounds(), 0.5, now).unwrap();
        let out = sup.step(now, &state, &field);
        cmd = Some(out.command);
        track.push(state.position);
    }
    (sup, track)
}

#[test]
fn supervisor_without_obstacles_stays_global() {
    let (sup, track) = fly(|_| Vec::new(), 10.0);
    assert_eq!(sup.transitions().len(), 1);
    assert_eq!(sup.mode(), Mode::FollowGlobal);
    assert!(track.iter().all(|p| p.y == 0.0 && p.z == 1.0));
}

#[test]
fn supervisor_detours_and_returns() {
    let (sup, track) = fly(|t| if t < 6.0 { block(Vec3::new(5.0, 0.0, 1.0), 0.3, 0.1, 0.2) } else { Vec::new() }, 14.0);
    let modes: Vec<Mode> = sup.transitions().iter().map(|(_, m)| *m).collect();
    assert!(modes.len() >= 3 && modes[1] == Mode::FollowLocal, "{modes:?}");
    assert_eq!(sup.mode(), Mode::FollowGlobal);
    let last = track.last().unwrap();
    let off = sup.global().points().iter().map(|p| p.position.distance(last)).fold(f64::INFINITY, f64::min);
    assert!(off <= FusionConfig::<f64>::default().merge_distance);
}

#[test]
fn supervisor_stays_local_behind_a_permanent_block() {
    let wall = |_: f64| {
        let mut ps = Vec::new();
        for i in 0..40 {
            for j in -8..=8 {
                for k in -6..=6 {
                    let p = Vec3::new(7.0 + 0.1 * i as f64, 0.1 * j as f64, 1.0 + 0.1 * k as f64);
                    ps.push(WeightedParticle::new_static(p, 0.2));
                }
            }
        }
        ps
    };
    let (sup, _) = fly(wall, 14.0);
    let modes: Vec<Mode> = sup.transitions().iter().map(|(_, m)| *m).collect();
    assert_eq!(modes, vec![Mode::FollowGlobal, Mode::FollowLocal]);
}
