use serde::{Deserialize, Serialize};

use super::FaultSpec;

/// Planar serial-chain end effector: `sum_j L_j (cos phi_j, sin phi_j)` with
/// `phi_j` the cumulative joint angle.
pub fn forward_kinematics(q: &[f64], lengths: &[f64]) -> [f64; 2] {
    debug_assert_eq!(q.len(), lengths.len());
    let mut phi = 0.0;
    let mut ee = [0.0, 0.0];
    for (&angle, &len) in q.iter().zip(lengths) {
        phi += angle;
        ee[0] += len * phi.cos();
        ee[1] += len * phi.sin();
    }
    ee
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrawlerGeometry {
    /// Hip attachment x-offsets along the body, rear to front.
    pub leg_offsets: Vec<f64>,
    pub upper_link: f64,
    pub lower_link: f64,
    pub body_height: f64,
}

impl Default for CrawlerGeometry {
    fn default() -> Self {
        Self {
            leg_offsets: vec![-0.5, -0.25, 0.25, 0.5],
            upper_link: 0.5,
            lower_link: 0.5,
            body_height: 0.85,
        }
    }
}

/// Foot position of one crawler leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foot {
    /// Body-relative x of the (effective) foot.
    pub rel_x: f64,
    /// Height above ground; `<= 0` means contact.
    pub height: f64,
}

/// Effective lower-link length and dangling length of a leg under `faults`.
pub(crate) fn leg_links(geometry: &CrawlerGeometry, leg: usize, faults: &[FaultSpec]) -> (f64, f64) {
    let mut lower = geometry.lower_link;
    let mut dangle = 0.0;
    for fault in faults {
        match *fault {
            FaultSpec::LinkShortenSevered { leg: l, factor } if l == leg => {
                lower = geometry.lower_link * factor;
                dangle = 0.0;
            }
            FaultSpec::LinkShortenUnsevered { leg: l, factor } if l == leg => {
                lower = geometry.lower_link * factor;
                dangle = geometry.lower_link - lower;
            }
            _ => {}
        }
    }
    (lower, dangle)
}

/// Knee at `(o + L_u sin h, H - L_u cos h)`, foot at
/// `knee + (L_l sin(h - k), -L_l cos(h - k))`. An unsevered break adds the
/// passive segment hanging straight down below the foot.
pub fn crawler_foot(geometry: &CrawlerGeometry, leg: usize, hip: f64, ankle: f64, faults: &[FaultSpec]) -> Foot {
    let (lower, dangle) = leg_links(geometry, leg, faults);
    foot_with_links(geometry, leg, hip, ankle, lower, dangle)
}

pub(crate) fn foot_with_links(geometry: &CrawlerGeometry, leg: usize, hip: f64, ankle: f64, lower: f64, dangle: f64) -> Foot {
    let knee_x = geometry.leg_offsets[leg] + geometry.upper_link * hip.sin();
    let knee_y = geometry.body_height - geometry.upper_link * hip.cos();
    let shin = hip - ankle;
    Foot {
        rel_x: knee_x + lower * shin.sin(),
        height: knee_y - lower * shin.cos() - dangle,
    }
}
