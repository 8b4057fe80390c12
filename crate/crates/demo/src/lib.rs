//! Browser demo over the core environments.
//!
//! Each exported operation has a plain Rust twin (`*_impl`) returning the
//! core `Result`, so the logic is testable without a JS host. The wasm
//! wrappers only turn errors into `JsError`.

use std::cell::Cell;

use faultadapt::envs::{apply_fault, crawler_foot, forward_kinematics, Env, EnvConfig, EnvState, FaultSpec, Geometry};
use faultadapt::harness::{state_visitation, DEFAULT_BINS};
use faultadapt::{Error, Result};
use wasm_bindgen::prelude::*;

/// Leg shown by the crawler view; every preset crawler fault hits leg 0.
const SHOWN_LEG: usize = 0;

/// `""` or `"none"` means healthy; anything else must be a preset name.
pub fn faulted(base: EnvConfig, fault: &str) -> Result<EnvConfig> {
    match fault {
        "" | "none" => Ok(base),
        name => {
            let spec = FaultSpec::preset(name).ok_or_else(|| Error::Config(format!("unknown fault preset {name:?}")))?;
            apply_fault(&base, spec)
        }
    }
}

fn arm_env(angles: &[f64], fault: &str) -> Result<Env> {
    let mut env = Env::new(faulted(EnvConfig::reach_arm(), fault)?)?;
    env.set_state(EnvState {
        q: angles.to_vec(),
        body_x: 0.0,
        goal: [0.0, 0.0],
        step: 0,
        prev_dx: 0.0,
    })?;
    Ok(env)
}

fn chain_points(q: &[f64], lengths: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0, 0.0];
    for k in 1..=q.len() {
        out.extend(forward_kinematics(&q[..k], &lengths[..k]));
    }
    out
}

/// Joint positions of the true arm, then of the arm the sensors report.
/// Layout: `[true x0, y0, .. x3, y3, sensed x0, y0, .. x3, y3]`.
pub fn arm_pose_impl(angles: &[f64], fault: &str) -> Result<Vec<f64>> {
    let env = arm_env(angles, fault)?;
    let Geometry::Arm { link_lengths, .. } = &env.config().geometry else {
        unreachable!("reach arm config")
    };
    let mut out = chain_points(&env.state().q, link_lengths);
    out.extend(chain_points(&env.sensed_angles(), link_lengths));
    Ok(out)
}

/// True joint angles after one step from `angles` under `action`.
pub fn arm_step_impl(angles: &[f64], action: &[f64], fault: &str) -> Result<Vec<f64>> {
    let mut env = arm_env(angles, fault)?;
    Ok(env.step(action)?.diagnostics.joint_angles)
}

/// Rear-leg geometry at the requested hip/ankle angles (radians), after the
/// fault's range clamp. Layout: `[hip x, y, knee x, y, foot x, y, tip x, y,
/// contact, hip, ankle]`; the tip is the end of a dangling segment and equals
/// the foot when nothing dangles.
pub fn crawler_leg_impl(hip: f64, ankle: f64, fault: &str) -> Result<Vec<f64>> {
    let cfg = faulted(EnvConfig::quad_crawler(), fault)?;
    let Geometry::Crawler(g) = &cfg.geometry else {
        unreachable!("crawler config")
    };
    let ranges = cfg.effective_ranges();
    let hip = ranges[2 * SHOWN_LEG].clamp(hip);
    let ankle = ranges[2 * SHOWN_LEG + 1].clamp(ankle);

    let mut lower = g.lower_link;
    for f in &cfg.faults {
        match *f {
            FaultSpec::LinkShortenSevered { leg, factor } | FaultSpec::LinkShortenUnsevered { leg, factor } if leg == SHOWN_LEG => {
                lower = g.lower_link * factor;
            }
            _ => {}
        }
    }
    let hip_x = g.leg_offsets[SHOWN_LEG];
    let knee = [hip_x + g.upper_link * hip.sin(), g.body_height - g.upper_link * hip.cos()];
    let foot = [knee[0] + lower * (hip - ankle).sin(), knee[1] - lower * (hip - ankle).cos()];
    let tip = crawler_foot(g, SHOWN_LEG, hip, ankle, &cfg.faults);
    Ok(vec![
        hip_x,
        g.body_height,
        knee[0],
        knee[1],
        foot[0],
        foot[1],
        tip.rel_x,
        tip.height,
        if tip.height <= 0.0 { 1.0 } else { 0.0 },
        hip,
        ankle,
    ])
}

/// Open-loop trot: hips and ankles swing sinusoidally, diagonal legs in phase.
fn trot(period: f64) -> impl Fn(&[f64]) -> Vec<f64> {
    let t = Cell::new(0u64);
    move |_: &[f64]| {
        let phase = t.get() as f64 * std::f64::consts::TAU / period;
        t.set(t.get() + 1);
        (0..4)
            .flat_map(|leg| {
                let p = phase + if leg % 2 == 0 { 0.0 } else { std::f64::consts::PI };
                [p.sin(), p.cos()]
            })
            .collect()
    }
}

/// Crawler joint-visitation heatmap of a fixed trot policy.
/// Layout: `[joints, bins, p(joint 0, bin 0), ..]`, rows summing to 1.
pub fn heatmap_impl(fault: &str, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let cfg = faulted(EnvConfig::quad_crawler(), fault)?;
    let h = state_visitation(&trot(16.0), &cfg, episodes, DEFAULT_BINS, seed)?;
    let mut out = vec![h.joints.len() as f64, h.bins as f64];
    out.extend(h.joints.into_iter().flatten());
    Ok(out)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn arm_pose(angles: &[f64], fault: &str) -> std::result::Result<Vec<f64>, JsError> {
    js(arm_pose_impl(angles, fault))
}

#[wasm_bindgen]
pub fn arm_step(angles: &[f64], action: &[f64], fault: &str) -> std::result::Result<Vec<f64>, JsError> {
    js(arm_step_impl(angles, action, fault))
}

#[wasm_bindgen]
pub fn crawler_leg(hip: f64, ankle: f64, fault: &str) -> std::result::Result<Vec<f64>, JsError> {
    js(crawler_leg_impl(hip, ankle, fault))
}

#[wasm_bindgen]
pub fn heatmap(fault: &str, episodes: usize, seed: u64) -> std::result::Result<Vec<f64>, JsError> {
    js(heatmap_impl(fault, episodes, seed))
}
