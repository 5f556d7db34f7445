//! User motion between two CSI updates and the resulting gain error.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{fov_radius, lumped_constant, Point3, ReceiverFrontEnd};
use crate::{Error, Result};

/// Users never leave this fraction of the FOV radius.
const FOV_MARGIN: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub width: f64,
    pub length: f64,
    pub height: f64,
}

impl Default for Room {
    fn default() -> Self {
        Room {
            width: 4.0,
            length: 4.0,
            height: 3.0,
        }
    }
}

/// Static layout shared by all mobility epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub room: Room,
    pub led: Point3,
    /// Vertical LED-to-PD distance.
    pub depth: f64,
    pub frontend: ReceiverFrontEnd,
    /// Horizontal start positions, one per user.
    pub starts: Vec<Point3>,
    lumped: f64,
    order: f64,
}

impl Deployment {
    pub fn new(
        room: Room,
        led: Point3,
        depth: f64,
        frontend: ReceiverFrontEnd,
        starts: Vec<Point3>,
    ) -> Result<Self> {
        if !(room.width > 0.0 && room.length > 0.0 && room.height > 0.0) {
            return Err(Error::InvalidConfig(
                "room dimensions must be positive".into(),
            ));
        }
        if !(depth > 0.0 && depth <= led.z) {
            return Err(Error::param("depth", depth, "must lie in (0, LED height]"));
        }
        Ok(Deployment {
            room,
            led,
            depth,
            frontend,
            starts,
            lumped: lumped_constant(&frontend, depth)?,
            order: frontend.lambertian_order()?,
        })
    }

    pub fn lumped(&self) -> f64 {
        self.lumped
    }

    pub fn lambertian_order(&self) -> f64 {
        self.order
    }

    /// Largest radius a user may occupy.
    pub fn radius_limit(&self) -> f64 {
        FOV_MARGIN * fov_radius(&self.frontend, self.depth)
    }

    pub fn radius_of(&self, p: &Point3) -> f64 {
        (p.x - self.led.x).hypot(p.y - self.led.y)
    }

    pub fn gain_at_radius(&self, r: f64) -> f64 {
        self.lumped / (r * r + self.depth * self.depth).powf((self.order + 3.0) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityMode {
    /// The group shares one radial step, stopped as a whole at the FOV
    /// edge or the LED axis, so the gain ordering never changes.
    Group,
    /// Each user walks its own heading; walls and the FOV edge clip the
    /// path and the ordering may change.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Every epoch starts from the deployment's start positions.
    Fixed,
    /// Every epoch draws fresh start positions uniformly over the FOV disc.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityEvent {
    pub start_radius: f64,
    pub end_radius: f64,
    pub speed: f64,
    pub elapsed: f64,
    pub depth: f64,
}

impl MobilityEvent {
    pub fn start_distance(&self) -> f64 {
        self.start_radius.hypot(self.depth)
    }

    pub fn end_distance(&self) -> f64 {
        self.end_radius.hypot(self.depth)
    }

    /// Path length allowed by the drawn speed.
    pub fn displacement(&self) -> f64 {
        self.speed * self.elapsed
    }
}

/// One CSI-update interval for every user.
pub fn simulate_mobility_epoch<R: Rng + ?Sized>(
    deployment: &Deployment,
    mode: MobilityMode,
    start: StartMode,
    max_speed: f64,
    elapsed: f64,
    rng: &mut R,
) -> Vec<MobilityEvent> {
    let limit = deployment.radius_limit();
    let starts: Vec<Point3> = match start {
        StartMode::Fixed => deployment.starts.clone(),
        StartMode::Uniform => deployment
            .starts
            .iter()
            .map(|_| {
                let r = limit * rng.random::<f64>().sqrt();
                let th = TAU * rng.random::<f64>();
                Point3::new(
                    deployment.led.x + r * th.cos(),
                    deployment.led.y + r * th.sin(),
                    deployment.led.z - deployment.depth,
                )
            })
            .collect(),
    };
    let radii: Vec<f64> = starts
        .iter()
        .map(|p| deployment.radius_of(p).min(limit))
        .collect();
    let event = |r1: f64, r2: f64, speed: f64| MobilityEvent {
        start_radius: r1,
        end_radius: r2,
        speed,
        elapsed,
        depth: deployment.depth,
    };

    match mode {
        MobilityMode::Group => {
            let speed = max_speed * rng.random::<f64>();
            let outward = rng.random::<bool>();
            let inner = radii.iter().copied().fold(f64::INFINITY, f64::min);
            let outer = radii.iter().copied().fold(0.0, f64::max);
            let step = if outward {
                (speed * elapsed).min(limit - outer).max(0.0)
            } else {
                -(speed * elapsed).min(inner)
            };
            radii.iter().map(|&r| event(r, r + step, speed)).collect()
        }
        MobilityMode::Independent => starts
            .iter()
            .zip(&radii)
            .map(|(p, &r1)| {
                let speed = max_speed * rng.random::<f64>();
                let th = TAU * rng.random::<f64>();
                let room = deployment.room;
                let x = (p.x + speed * elapsed * th.cos()).clamp(0.0, room.width);
                let y = (p.y + speed * elapsed * th.sin()).clamp(0.0, room.length);
                let r2 = (x - deployment.led.x)
                    .hypot(y - deployment.led.y)
                    .min(limit);
                event(r1, r2, speed)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// `|w / d2^(m+3) - w / d1^(m+3)|`, the actual gain difference.
    #[default]
    GainDifference,
    /// `w |d2^(m+3) - d1^(m+3)|`.
    Literal,
}

pub fn error_bound(event: &MobilityEvent, lumped: f64, order: f64, mode: BoundMode) -> f64 {
    if event.speed == 0.0 || event.elapsed == 0.0 {
        return 0.0;
    }
    let e = order + 3.0;
    let (d1, d2) = (event.start_distance(), event.end_distance());
    match mode {
        BoundMode::GainDifference => (lumped / d2.powf(e) - lumped / d1.powf(e)).abs(),
        BoundMode::Literal => lumped * (d2.powf(e) - d1.powf(e)).abs(),
    }
}

/// Largest error bound over the radial moves of at most `reach` metres
/// that stay inside the FOV.
pub fn worst_case_bound(deployment: &Deployment, radius: f64, reach: f64, mode: BoundMode) -> f64 {
    let event = |end: f64| MobilityEvent {
        start_radius: radius,
        end_radius: end,
        speed: 1.0,
        elapsed: 1.0,
        depth: deployment.depth,
    };
    let (lumped, order) = (deployment.lumped, deployment.order);
    let closer = error_bound(&event((radius - reach).max(0.0)), lumped, order, mode);
    let farther = error_bound(
        &event((radius + reach).min(deployment.radius_limit())),
        lumped,
        order,
        mode,
    );
    closer.max(farther)
}
