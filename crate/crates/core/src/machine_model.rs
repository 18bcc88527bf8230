//! Machine cross-section: radii, pole/slot sectors, materials and rigid rotation.
//!
//! Both subdomains are annuli centred at the origin. The rotor annulus runs from
//! `r_rotor_in` to the coupling circle `r_gamma`, the stator annulus from
//! `r_gamma` to `r_stator_out`. Each side is described in its own frame: rotor
//! points are given in rotor coordinates, so the material pattern never moves.
//!
//! Rotor, from the inside out: iron up to `r_magnet_in`, then a band of `2P`
//! radially magnetized magnet sectors of alternating sign (pole `k` centred at
//! `k * pi / P`), then air up to `r_gamma`. Stator, from the inside out: air up
//! to `r_stator_in`, then a band of `S` slots separated by teeth (tooth centred
//! at angle 0, slot `k` centred at `(k + 1/2) * 2 pi / S`), then the iron yoke.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability (H/m).
pub const MU_0: f64 = 4.0e-7 * PI;

pub type Point = [f64; 2];

/// How the magnetization magnitude is derived from the remanence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MagnetizationConvention {
    /// `|M| = B_rem / (mu_0 mu_r)`, the linear permanent-magnet model.
    #[default]
    Relative,
    /// `|M| = B_rem / mu_0`.
    Vacuum,
}

/// Machine geometry, materials and discretization. Missing keys in a
/// deserialized document take their values from [`default_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachineConfig {
    pub r_rotor_in: f64,
    pub r_rotor_out: f64,
    pub r_stator_in: f64,
    pub r_stator_out: f64,
    pub r_gamma: f64,
    /// Inner radius of the magnet band, `r_rotor_in < r_magnet_in < r_rotor_out`.
    pub r_magnet_in: f64,
    /// Outer radius of the slot band, `r_stator_in < r_slot_out < r_stator_out`.
    pub r_slot_out: f64,
    pub pole_pairs: usize,
    pub slots: usize,
    pub mu_r_iron: f64,
    pub mu_r_copper: f64,
    pub mu_r_magnet: f64,
    pub b_remanence: f64,
    pub magnetization_convention: MagnetizationConvention,
    pub axial_length: f64,
    /// Fraction of the pole pitch covered by magnet material.
    pub magnet_coverage: f64,
    /// Fraction of the slot pitch covered by the slot opening.
    pub slot_coverage: f64,
    pub multiplier_degree: usize,
    pub angular_divisions_rotor: usize,
    pub angular_divisions_stator: usize,
    /// Minimum number of element layers per radial band.
    pub radial_layers: usize,
    /// Source current density per slot (A/m^2); empty means no excitation.
    pub current_density: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionTag {
    RotorIron,
    MagnetPos,
    MagnetNeg,
    StatorIron,
    Slot,
    AirGapRotor,
    AirGapStator,
}

impl RegionTag {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn is_rotor(self) -> bool {
        matches!(
            self,
            RegionTag::RotorIron | RegionTag::MagnetPos | RegionTag::MagnetNeg | RegionTag::AirGapRotor
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Rotor,
    Stator,
}

/// Piecewise-constant material data at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub tag: RegionTag,
    /// Reluctivity `1 / (mu_0 mu_r)` (m/H).
    pub nu: f64,
    /// Rotated magnetization `(m_y, -m_x)` (A/m).
    pub m_perp: [f64; 2],
    /// Impressed current density (A/m^2).
    pub current: f64,
}

pub fn rotate_point(p: Point, alpha: f64) -> Point {
    let (s, c) = alpha.sin_cos();
    [p[0] * c - p[1] * s, p[0] * s + p[1] * c]
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// Machine parameters of the six-pole, 36-slot permanent magnet machine.
pub fn default_config() -> MachineConfig {
    let r_rotor_out = 0.044;
    let r_stator_in = 0.045;
    MachineConfig {
        r_rotor_in: 0.016,
        r_rotor_out,
        r_stator_in,
        r_stator_out: 0.0675,
        r_gamma: 0.5 * (r_rotor_out + r_stator_in),
        r_magnet_in: 0.040,
        r_slot_out: 0.055,
        pole_pairs: 3,
        slots: 36,
        mu_r_iron: 500.0,
        mu_r_copper: 1.0,
        mu_r_magnet: 1.05,
        b_remanence: 0.94,
        magnetization_convention: MagnetizationConvention::Relative,
        axial_length: 0.1,
        magnet_coverage: 0.8,
        slot_coverage: 0.5,
        multiplier_degree: 24,
        angular_divisions_rotor: 180,
        angular_divisions_stator: 288,
        radial_layers: 1,
        current_density: Vec::new(),
    }
}

impl Default for MachineConfig {
    fn default() -> Self {
        default_config()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl MachineConfig {
    pub fn validate(&self) -> Result<()> {
        let radii = [
            ("r_rotor_in", self.r_rotor_in),
            ("r_magnet_in", self.r_magnet_in),
            ("r_rotor_out", self.r_rotor_out),
            ("r_gamma", self.r_gamma),
            ("r_stator_in", self.r_stator_in),
            ("r_slot_out", self.r_slot_out),
            ("r_stator_out", self.r_stator_out),
        ];
        if !(radii[0].1 > 0.0) {
            return Err(Error::config("r_rotor_in", "must be positive"));
        }
        for w in radii.windows(2) {
            if !(w[0].1 < w[1].1) || !w[1].1.is_finite() {
                return Err(Error::config(
                    w[1].0,
                    format!("radii must increase strictly: {} = {} is not below {} = {}", w[0].0, w[0].1, w[1].0, w[1].1),
                ));
            }
        }
        for (key, v) in [
            ("mu_r_iron", self.mu_r_iron),
            ("mu_r_copper", self.mu_r_copper),
            ("mu_r_magnet", self.mu_r_magnet),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(key, "relative permeability must be positive and finite"));
            }
        }
        if !self.b_remanence.is_finite() {
            return Err(Error::config("b_remanence", "must be finite"));
        }
        if !(self.axial_length > 0.0) {
            return Err(Error::config("axial_length", "must be positive"));
        }
        if self.pole_pairs == 0 {
            return Err(Error::config("pole_pairs", "must be positive"));
        }
        if self.slots == 0 {
            return Err(Error::config("slots", "must be positive"));
        }
        for (key, v) in [("magnet_coverage", self.magnet_coverage), ("slot_coverage", self.slot_coverage)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, "coverage must lie in [0, 1]"));
            }
        }
        if self.radial_layers == 0 {
            return Err(Error::config("radial_layers", "must be positive"));
        }
        if self.angular_divisions_rotor == 0 || self.angular_divisions_rotor % (2 * self.pole_pairs) != 0 {
            return Err(Error::config(
                "angular_divisions_rotor",
                format!("must be a positive multiple of 2 * pole_pairs = {}", 2 * self.pole_pairs),
            ));
        }
        if self.angular_divisions_stator == 0 || self.angular_divisions_stator % self.slots != 0 {
            return Err(Error::config(
                "angular_divisions_stator",
                format!("must be a positive multiple of slots = {}", self.slots),
            ));
        }
        if !self.current_density.is_empty() && self.current_density.len() != self.slots {
            return Err(Error::config(
                "current_density",
                format!("expected {} entries (one per slot) or none, got {}", self.slots, self.current_density.len()),
            ));
        }
        if self.current_density.iter().any(|j| !j.is_finite()) {
            return Err(Error::config("current_density", "entries must be finite"));
        }
        Ok(())
    }

    pub fn pole_pitch(&self) -> f64 {
        PI / self.pole_pairs as f64
    }

    pub fn slot_pitch(&self) -> f64 {
        2.0 * PI / self.slots as f64
    }

    /// Magnitude of the magnetization in the magnet sectors (A/m).
    pub fn magnetization(&self) -> f64 {
        match self.magnetization_convention {
            MagnetizationConvention::Relative => self.b_remanence / (MU_0 * self.mu_r_magnet),
            MagnetizationConvention::Vacuum => self.b_remanence / MU_0,
        }
    }

    /// Number of torque periods per revolution, `lcm(2P, S)`.
    pub fn cogging_order(&self) -> usize {
        let a = 2 * self.pole_pairs;
        a / gcd(a, self.slots) * self.slots
    }

    pub fn torque_period(&self) -> f64 {
        2.0 * PI / self.cogging_order() as f64
    }

    /// Multiplier modes allowed by the half-wave symmetry of the pole pattern:
    /// odd multiples of the pole pair count.
    pub fn is_relevant_multiplier_mode(&self, n: usize) -> bool {
        n > 0 && n % self.pole_pairs == 0 && (n / self.pole_pairs) % 2 == 1
    }

    pub fn is_relevant_torque_mode(&self, m: usize) -> bool {
        m > 0 && m % self.cogging_order() == 0
    }

    /// True when the half-wave symmetry of the pole pattern carries over to the
    /// whole machine: the stator pattern and any current must repeat every pole pitch.
    pub fn has_pole_symmetry(&self) -> bool {
        (2 * self.pole_pairs) > 0
            && self.slots % (2 * self.pole_pairs) == 0
            && self.current_density.iter().all(|&j| j == 0.0)
    }

    pub fn has_sources(&self) -> bool {
        self.b_remanence != 0.0 && self.magnet_coverage > 0.0
            || self.current_density.iter().any(|&j| j != 0.0)
    }

    pub fn nu(&self, mu_r: f64) -> f64 {
        1.0 / (MU_0 * mu_r)
    }

    /// Region tag of a point given in its own subdomain frame.
    pub fn region_at(&self, p: Point) -> Result<(RegionTag, usize)> {
        let r = p[0].hypot(p[1]);
        let theta = wrap_angle(p[1].atan2(p[0]));
        if r < self.r_rotor_in || r > self.r_stator_out || !r.is_finite() {
            return Err(Error::Domain { x: p[0], y: p[1] });
        }
        if r < self.r_gamma {
            if r >= self.r_rotor_out {
                return Ok((RegionTag::AirGapRotor, 0));
            }
            if r < self.r_magnet_in {
                return Ok((RegionTag::RotorIron, 0));
            }
            let pitch = self.pole_pitch();
            let poles = 2 * self.pole_pairs;
            let k = (theta / pitch).round();
            let offset = theta - k * pitch;
            let pole = (k as usize) % poles;
            if offset.abs() < 0.5 * self.magnet_coverage * pitch {
                let tag = if pole % 2 == 0 { RegionTag::MagnetPos } else { RegionTag::MagnetNeg };
                Ok((tag, pole))
            } else {
                Ok((RegionTag::AirGapRotor, 0))
            }
        } else {
            if r < self.r_stator_in {
                return Ok((RegionTag::AirGapStator, 0));
            }
            if r >= self.r_slot_out {
                return Ok((RegionTag::StatorIron, 0));
            }
            let pitch = self.slot_pitch();
            let k = (theta / pitch).floor();
            let offset = theta - (k + 0.5) * pitch;
            let slot = (k as usize) % self.slots;
            if offset.abs() < 0.5 * self.slot_coverage * pitch {
                Ok((RegionTag::Slot, slot))
            } else {
                Ok((RegionTag::StatorIron, 0))
            }
        }
    }

    /// Material data at a point given in its own subdomain frame.
    pub fn material_at(&self, p: Point) -> Result<Material> {
        let (tag, index) = self.region_at(p)?;
        let vacuum = self.nu(1.0);
        let material = match tag {
            RegionTag::RotorIron | RegionTag::StatorIron => Material {
                tag,
                nu: self.nu(self.mu_r_iron),
                m_perp: [0.0, 0.0],
                current: 0.0,
            },
            RegionTag::AirGapRotor | RegionTag::AirGapStator => Material {
                tag,
                nu: vacuum,
                m_perp: [0.0, 0.0],
                current: 0.0,
            },
            RegionTag::MagnetPos | RegionTag::MagnetNeg => {
                let sign = if tag == RegionTag::MagnetPos { 1.0 } else { -1.0 };
                let theta = p[1].atan2(p[0]);
                let m = [sign * self.magnetization() * theta.cos(), sign * self.magnetization() * theta.sin()];
                Material {
                    tag,
                    nu: self.nu(self.mu_r_magnet),
                    m_perp: [m[1], -m[0]],
                    current: 0.0,
                }
            }
            RegionTag::Slot => Material {
                tag,
                nu: self.nu(self.mu_r_copper),
                m_perp: [0.0, 0.0],
                current: self.current_density.get(index).copied().unwrap_or(0.0),
            },
        };
        Ok(material)
    }
}
