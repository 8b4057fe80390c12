use serde::{Deserialize, Serialize};

use super::{EnvConfig, EnvKind};
use crate::{Error, Result};

/// One hardware fault and its parameters.
///
/// Crawler joints are numbered leg-major: joint `2 * leg` is the hip of
/// `leg`, joint `2 * leg + 1` its ankle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultSpec {
    /// Joint limited to a sub-interval of its original range (radians).
    RomRestriction { joint: usize, min: f64, max: f64 },
    /// Lower link of a crawler leg shortened by `factor`; the removed part is gone.
    LinkShortenSevered { leg: usize, factor: f64 },
    /// Lower link shortened by `factor`; the removed part dangles from the
    /// break on a free hinge and stays in the ground-contact computation.
    LinkShortenUnsevered { leg: usize, factor: f64 },
    /// Position sensor reports `value` forever. Dynamics are unaffected.
    FrozenSensor { joint: usize, value: f64 },
    /// Every commanded joint delta is biased by `offset` radians.
    PositionSlippage { joint: usize, offset: f64 },
}

impl FaultSpec {
    /// Crawler rear-leg hip limited to [-5°, 5°].
    pub fn hip_rom() -> Self {
        FaultSpec::RomRestriction {
            joint: 0,
            min: (-5.0f64).to_radians(),
            max: 5.0f64.to_radians(),
        }
    }

    /// Crawler rear-leg ankle limited to [65°, 70°].
    pub fn ankle_rom() -> Self {
        FaultSpec::RomRestriction {
            joint: 1,
            min: 65.0f64.to_radians(),
            max: 70.0f64.to_radians(),
        }
    }

    pub fn severed_limb() -> Self {
        FaultSpec::LinkShortenSevered { leg: 0, factor: 0.5 }
    }

    pub fn unsevered_limb() -> Self {
        FaultSpec::LinkShortenUnsevered { leg: 0, factor: 0.5 }
    }

    /// Reach-arm shoulder sensor stuck at -1.5 rad.
    pub fn frozen_shoulder() -> Self {
        FaultSpec::FrozenSensor {
            joint: 1,
            value: -1.5,
        }
    }

    /// Reach-arm elbow moving 0.05 rad further than commanded.
    pub fn elbow_slippage() -> Self {
        FaultSpec::PositionSlippage {
            joint: 2,
            offset: 0.05,
        }
    }

    /// Preset name when the fault equals one, otherwise its kind.
    pub fn label(&self) -> String {
        const PRESETS: [&str; 6] = ["hip_rom", "ankle_rom", "severed_limb", "unsevered_limb", "frozen_shoulder", "elbow_slippage"];
        if let Some(name) = PRESETS.iter().find(|n| Self::preset(n).as_ref() == Some(self)) {
            return name.to_string();
        }
        match self {
            FaultSpec::RomRestriction { .. } => "rom_restriction",
            FaultSpec::LinkShortenSevered { .. } => "link_shorten_severed",
            FaultSpec::LinkShortenUnsevered { .. } => "link_shorten_unsevered",
            FaultSpec::FrozenSensor { .. } => "frozen_sensor",
            FaultSpec::PositionSlippage { .. } => "position_slippage",
        }
        .to_string()
    }

    /// Looks up one of the named faults above.
    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "hip_rom" => Self::hip_rom(),
            "ankle_rom" => Self::ankle_rom(),
            "severed_limb" => Self::severed_limb(),
            "unsevered_limb" => Self::unsevered_limb(),
            "frozen_shoulder" => Self::frozen_shoulder(),
            "elbow_slippage" => Self::elbow_slippage(),
            _ => return None,
        })
    }

    pub(crate) fn validate(&self, config: &EnvConfig) -> Result<()> {
        let joints = config.num_joints();
        let bad = |msg: String| Err(Error::Config(format!("invalid fault {self:?}: {msg}")));
        match *self {
            FaultSpec::RomRestriction { joint, min, max } => {
                if joint >= joints {
                    return bad(format!("joint {joint} out of {joints}"));
                }
                let orig = config.joint_ranges[joint];
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return bad("range must satisfy min < max".into());
                }
                if min < orig.min || max > orig.max {
                    return bad(format!("range not inside original [{}, {}]", orig.min, orig.max));
                }
            }
            FaultSpec::LinkShortenSevered { leg, factor } | FaultSpec::LinkShortenUnsevered { leg, factor } => {
                if config.kind != EnvKind::QuadCrawler {
                    return bad("link faults apply to the crawler only".into());
                }
                if leg >= config.num_legs() {
                    return bad(format!("leg {leg} out of {}", config.num_legs()));
                }
                if !(factor > 0.0 && factor <= 1.0) {
                    return bad("factor must lie in (0, 1]".into());
                }
            }
            FaultSpec::FrozenSensor { joint, value } => {
                if joint >= joints {
                    return bad(format!("joint {joint} out of {joints}"));
                }
                if !value.is_finite() {
                    return bad("frozen value must be finite".into());
                }
            }
            FaultSpec::PositionSlippage { joint, offset } => {
                if joint >= joints {
                    return bad(format!("joint {joint} out of {joints}"));
                }
                if !offset.is_finite() {
                    return bad("offset must be finite".into());
                }
            }
        }
        Ok(())
    }
}

/// Returns `config` with `fault` active.
pub fn apply_fault(config: &EnvConfig, fault: FaultSpec) -> Result<EnvConfig> {
    fault.validate(config)?;
    let mut out = config.clone();
    out.faults.push(fault);
    Ok(out)
}
