use std::path::Path;

use ras_sim::{run, Method, RunOptions, Scenario};

fn scenario(name: &str) -> Scenario {
    Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml")), &[]).unwrap()
}

/// Steady cruise speed of the planner in open space (see README).
const V_CRUISE: f64 = 2.13;

#[test]
fn empty_world_flies_straight_to_the_goal() {
    let s = scenario("empty");
    for method in Method::ALL {
        let o = run(&s, method, 0, RunOptions::default()).unwrap();
        let m = &o.metrics;
        assert_eq!((m.collision_count, m.freezing_count), (0, 0), "{method}");
        assert!(m.reached_goal, "{method}");
        let expect = 16.0 / V_CRUISE;
        assert!((m.flight_time - expect).abs() <= 0.2 * expect, "{method}: {}", m.flight_time);
        assert!(o.rows.iter().all(|r| r.position.y.abs() < 0.3 && (r.position.z - 1.0).abs() < 0.3));
    }
}

#[test]
fn collisions_are_counted_on_rising_edges() {
    let s = scenario("crossing");
    let mut total = 0;
    for seed in 0..6 {
        let o = run(&s, Method::NoPrediction, seed, RunOptions::default()).unwrap();
        let mut edges = 0;
        let mut prev = false;
        for r in &o.rows {
            if r.collision && !prev {
                edges += 1;
            }
            prev = r.collision;
        }
        assert_eq!(o.metrics.collision_count, edges);
        total += edges;
    }
    assert!(total > 0);
}

#[test]
fn commanded_motion_respects_the_limits() {
    let s = scenario("crossing");
    for method in Method::ALL {
        let o = run(&s, method, 3, RunOptions::default()).unwrap();
        assert!(o.max_speed <= s.sampler.v_max + 1e-6 && o.max_accel <= s.sampler.a_max + 1e-6, "{method}");
        assert!(o.max_junction_residual < 1e-9);
        assert!(o.rows.iter().all(|r| r.velocity.norm() <= s.sampler.v_max + 1e-6));
    }
}

#[test]
fn traces_are_deterministic() {
    let s = scenario("crossing");
    let a = run(&s, Method::Ras, 7, RunOptions::default()).unwrap();
    let b = run(&s, Method::Ras, 7, RunOptions::default()).unwrap();
    assert_eq!(a.trace_csv(), b.trace_csv());
    assert_eq!(a.metrics.to_text(), b.metrics.to_text());
    let c = run(&s, Method::Ras, 8, RunOptions::default()).unwrap();
    assert_ne!(a.trace_csv(), c.trace_csv());
    let header = a.trace_csv().lines().next().unwrap().to_string();
    assert_eq!(header, "t,x,y,z,vx,vy,vz,mode,risk1,cost,collision_flag,latency_us");
}

#[test]
fn fusion_scenario_returns_to_the_global_path() {
    let s = scenario("fusion");
    let o = run(&s, Method::Ras, 0, RunOptions::default()).unwrap();
    assert_eq!(o.metrics.collision_count, 0);
    assert!(o.metrics.reached_goal);
    assert!(o.transitions.len() >= 3);
    assert!(o.merges.iter().all(|m| m.distance <= s.fusion.merge_distance));
    assert!(o.rows.iter().any(|r| r.mode == "follow_local"));
}
