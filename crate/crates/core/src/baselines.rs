//! Situation-independent reference styles.
//!
//! Rail keeps the lane center; Passive and Sportive cut curves with a lateral
//! offset proportional to curvature (`d = −g·κ`), clamped to `±d_clamp`.
//! These are simple stand-ins, not reproductions of any published model.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StyleKind {
    Rail,
    Passive,
    Sportive,
}

impl StyleKind {
    pub fn name(self) -> &'static str {
        match self {
            StyleKind::Rail => "rail",
            StyleKind::Passive => "passive",
            StyleKind::Sportive => "sportive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticStyle {
    kind: StyleKind,
    /// Meters of offset per 1/m of curvature.
    gradient: f64,
    /// Meters.
    clamp: f64,
}

pub const DEFAULT_PASSIVE_GRADIENT: f64 = 5.0;
pub const DEFAULT_SPORTIVE_GRADIENT: f64 = 30.0;
pub const DEFAULT_CLAMP: f64 = 0.5;

impl StaticStyle {
    pub fn new(kind: StyleKind, gradient: f64, clamp: f64) -> Result<Self> {
        if !(clamp.is_finite() && clamp > 0.0) {
            return Err(Error::arg("d_clamp", "must be positive and finite"));
        }
        if !gradient.is_finite() {
            return Err(Error::arg("gradient", "must be finite"));
        }
        let gradient = if kind == StyleKind::Rail {
            0.0
        } else {
            gradient
        };
        Ok(Self {
            kind,
            gradient,
            clamp,
        })
    }

    pub fn rail() -> Self {
        Self {
            kind: StyleKind::Rail,
            gradient: 0.0,
            clamp: DEFAULT_CLAMP,
        }
    }

    pub fn passive() -> Self {
        Self {
            kind: StyleKind::Passive,
            gradient: DEFAULT_PASSIVE_GRADIENT,
            clamp: DEFAULT_CLAMP,
        }
    }

    pub fn sportive() -> Self {
        Self {
            kind: StyleKind::Sportive,
            gradient: DEFAULT_SPORTIVE_GRADIENT,
            clamp: DEFAULT_CLAMP,
        }
    }

    pub fn of_kind(kind: StyleKind) -> Self {
        match kind {
            StyleKind::Rail => Self::rail(),
            StyleKind::Passive => Self::passive(),
            StyleKind::Sportive => Self::sportive(),
        }
    }

    pub fn kind(&self) -> StyleKind {
        self.kind
    }

    pub fn gradient(&self) -> f64 {
        self.gradient
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    /// Lateral offset (m) for a curvature (1/m).
    pub fn predict(&self, curvature: f64) -> f64 {
        if self.kind == StyleKind::Rail {
            return 0.0;
        }
        (-self.gradient * curvature).clamp(-self.clamp, self.clamp)
    }
}
