//! Line-of-sight Lambertian channel between a ceiling LED and a
//! photodiode, and the receiver noise model.
//!
//! The LED points straight down and every photodiode faces straight up, so
//! the emergence and incidence angles of a link coincide and both equal
//! `acos(z / d)` where `z` is the vertical LED-to-PD separation.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default receiver height below the LED used when placing users.
pub const DEFAULT_TABLE_DEPTH: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Geometry of one LED-to-PD link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub led_position: Point3,
    pub pd_position: Point3,
    /// Angle of emergence w.r.t. the LED axis, radians.
    pub emergence_angle: f64,
    /// Angle of incidence w.r.t. the PD axis, radians.
    pub incidence_angle: f64,
    pub distance: f64,
    pub vertical_height: f64,
}

impl LinkGeometry {
    /// Builds the geometry for a downward LED and an upward PD.
    pub fn between(led_position: Point3, pd_position: Point3) -> Result<Self> {
        let distance = led_position.distance(&pd_position);
        if !(distance > 0.0) {
            return Err(Error::param("distance", distance, "LED and PD coincide"));
        }
        let vertical_height = led_position.z - pd_position.z;
        if vertical_height < 0.0 {
            return Err(Error::param(
                "vertical_height",
                vertical_height,
                "photodiode sits above the LED",
            ));
        }
        let angle = (vertical_height / distance).clamp(-1.0, 1.0).acos();
        Ok(LinkGeometry {
            led_position,
            pd_position,
            emergence_angle: angle,
            incidence_angle: angle,
            distance,
            vertical_height,
        })
    }
}

/// Photodiode front end and LED radiation pattern parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverFrontEnd {
    /// Detector area, m².
    pub pd_area: f64,
    /// Field of view (half angle), radians.
    pub fov: f64,
    pub refractive_index: f64,
    pub optical_filter_gain: f64,
    /// Detector responsivity, A/W.
    pub responsivity: f64,
    /// LED semi-angle at half power, radians.
    pub semi_angle: f64,
}

impl ReceiverFrontEnd {
    pub fn new(
        pd_area: f64,
        fov: f64,
        refractive_index: f64,
        optical_filter_gain: f64,
        responsivity: f64,
        semi_angle: f64,
    ) -> Result<Self> {
        let fe = ReceiverFrontEnd {
            pd_area,
            fov,
            refractive_index,
            optical_filter_gain,
            responsivity,
            semi_angle,
        };
        fe.validate()?;
        Ok(fe)
    }

    /// The simulation front end: 1 cm² PD, 45° FOV, n = 1.5, unity filter
    /// gain, 1 A/W responsivity and a 50° LED semi-angle.
    pub fn nominal() -> Self {
        ReceiverFrontEnd {
            pd_area: 1.0e-4,
            fov: 45f64.to_radians(),
            refractive_index: 1.5,
            optical_filter_gain: 1.0,
            responsivity: 1.0,
            semi_angle: 50f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pd_area > 0.0) {
            return Err(Error::param("pd_area", self.pd_area, "must be positive"));
        }
        if !(self.fov > 0.0 && self.fov <= FRAC_PI_2) {
            return Err(Error::param("fov", self.fov, "must lie in (0, pi/2]"));
        }
        if !(self.refractive_index >= 1.0) {
            return Err(Error::param(
                "refractive_index",
                self.refractive_index,
                "must be at least 1",
            ));
        }
        if !(self.optical_filter_gain > 0.0 && self.optical_filter_gain <= 1.0) {
            return Err(Error::param(
                "optical_filter_gain",
                self.optical_filter_gain,
                "must lie in (0, 1]",
            ));
        }
        if !(self.responsivity > 0.0) {
            return Err(Error::param(
                "responsivity",
                self.responsivity,
                "must be positive",
            ));
        }
        lambertian_order(self.semi_angle).map(|_| ())
    }

    pub fn lambertian_order(&self) -> Result<f64> {
        lambertian_order(self.semi_angle)
    }
}

/// Physical constants and circuit parameters of the transimpedance
/// receiver. Only bandwidth comes from the simulation table; the rest are
/// common indoor-VLC values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEnvironment {
    pub electronic_charge: f64,
    pub bandwidth: f64,
    pub background_current: f64,
    pub noise_bw_factor: f64,
    pub noise_bw_factor_2: f64,
    pub boltzmann: f64,
    pub temperature: f64,
    pub open_loop_gain: f64,
    /// Fixed PD capacitance per unit area, F/m².
    pub capacitance_per_area: f64,
    pub fet_noise_factor: f64,
    pub fet_transconductance: f64,
}

impl Default for NoiseEnvironment {
    fn default() -> Self {
        NoiseEnvironment {
            electronic_charge: 1.602e-19,
            bandwidth: 10.0e6,
            background_current: 100.0e-6,
            noise_bw_factor: 0.562,
            noise_bw_factor_2: 0.0868,
            boltzmann: 1.380_649e-23,
            temperature: 295.0,
            open_loop_gain: 10.0,
            capacitance_per_area: 1.12e-6,
            fet_noise_factor: 1.5,
            fet_transconductance: 30.0e-3,
        }
    }
}

impl NoiseEnvironment {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("electronic_charge", self.electronic_charge),
            ("bandwidth", self.bandwidth),
            ("background_current", self.background_current),
            ("noise_bw_factor", self.noise_bw_factor),
            ("noise_bw_factor_2", self.noise_bw_factor_2),
            ("boltzmann", self.boltzmann),
            ("temperature", self.temperature),
            ("open_loop_gain", self.open_loop_gain),
            ("capacitance_per_area", self.capacitance_per_area),
            ("fet_noise_factor", self.fet_noise_factor),
            ("fet_transconductance", self.fet_transconductance),
        ];
        for (name, value) in fields {
            if !(value > 0.0) {
                return Err(Error::param(name, value, "must be strictly positive"));
            }
        }
        Ok(())
    }

    /// Shot plus thermal variance for one receiver, A².
    pub fn total_variance(&self, responsivity: f64, gain: f64, signal: f64, pd_area: f64) -> f64 {
        shot_variance(self, responsivity, gain, signal) + thermal_variance(self, pd_area)
    }
}

/// Order `m` of the Lambertian emission pattern for a given half-power
/// semi-angle.
pub fn lambertian_order(semi_angle: f64) -> Result<f64> {
    if !(semi_angle > 0.0 && semi_angle < FRAC_PI_2) {
        return Err(Error::param(
            "semi_angle",
            semi_angle,
            "must lie in (0, pi/2)",
        ));
    }
    let m = -LN_2 / semi_angle.cos().ln();
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::param(
            "semi_angle",
            semi_angle,
            "Lambertian order undefined",
        ));
    }
    Ok(m)
}

/// Gain of the non-imaging optical concentrator.
pub fn concentrator_gain(incidence: f64, fov: f64, refractive_index: f64) -> Result<f64> {
    if incidence < 0.0 {
        return Err(Error::param("incidence", incidence, "must be non-negative"));
    }
    if !(fov > 0.0 && fov <= FRAC_PI_2) {
        return Err(Error::param("fov", fov, "must lie in (0, pi/2]"));
    }
    if !(refractive_index >= 1.0) {
        return Err(Error::param(
            "refractive_index",
            refractive_index,
            "must be at least 1",
        ));
    }
    if incidence > fov {
        return Ok(0.0);
    }
    let s = fov.sin();
    Ok(refractive_index * refractive_index / (s * s))
}

/// DC gain of a line-of-sight link; zero outside the receiver FOV.
pub fn channel_gain(geometry: &LinkGeometry, frontend: &ReceiverFrontEnd) -> Result<f64> {
    let m = frontend.lambertian_order()?;
    let g = concentrator_gain(
        geometry.incidence_angle,
        frontend.fov,
        frontend.refractive_index,
    )?;
    if g == 0.0 {
        return Ok(0.0);
    }
    let d = geometry.distance;
    let radiant = (m + 1.0) / (2.0 * PI) * geometry.emergence_angle.cos().powf(m);
    Ok(frontend.pd_area / (d * d)
        * radiant
        * frontend.optical_filter_gain
        * g
        * geometry.incidence_angle.cos())
}

/// Lumped constant `w` such that every in-FOV PD at vertical depth
/// `height` below the LED has gain `w / d^(m+3)`.
pub fn lumped_constant(frontend: &ReceiverFrontEnd, height: f64) -> Result<f64> {
    if !(height > 0.0) {
        return Err(Error::param("height", height, "must be positive"));
    }
    let m = frontend.lambertian_order()?;
    let g = concentrator_gain(0.0, frontend.fov, frontend.refractive_index)?;
    Ok(
        (m + 1.0) * frontend.pd_area * frontend.optical_filter_gain * g / (2.0 * PI)
            * height.powf(m + 1.0),
    )
}

/// `w / d^(m+3)`.
pub fn simplified_gain(distance: f64, lumped: f64, order: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::param("distance", distance, "must be positive"));
    }
    Ok(lumped / distance.powf(order + 3.0))
}

/// Shot-noise variance `2qB(γ h x + I_bg I₂)`.
pub fn shot_variance(env: &NoiseEnvironment, responsivity: f64, gain: f64, signal: f64) -> f64 {
    2.0 * env.electronic_charge
        * env.bandwidth
        * (responsivity * gain * signal + env.background_current * env.noise_bw_factor)
}

/// Thermal-noise variance of the transimpedance front end (feedback
/// resistor term plus FET channel term).
pub fn thermal_variance(env: &NoiseEnvironment, pd_area: f64) -> f64 {
    let kt = env.boltzmann * env.temperature;
    let b = env.bandwidth;
    let eta_a = env.capacitance_per_area * pd_area;
    let feedback = 8.0 * PI * kt / env.open_loop_gain * eta_a * env.noise_bw_factor * b * b;
    let fet = 16.0 * PI * PI * kt * env.fet_noise_factor / env.fet_transconductance
        * eta_a
        * eta_a
        * env.noise_bw_factor_2
        * b
        * b
        * b;
    feedback + fet
}

/// Channel gain of an upward PD at horizontal offset `radius` and depth
/// `height` below the LED.
pub fn gain_at_radius(radius: f64, frontend: &ReceiverFrontEnd, height: f64) -> Result<f64> {
    let led = Point3::new(0.0, 0.0, height);
    let pd = Point3::new(radius.abs(), 0.0, 0.0);
    channel_gain(&LinkGeometry::between(led, pd)?, frontend)
}

/// Largest horizontal offset still inside the receiver FOV.
pub fn fov_radius(frontend: &ReceiverFrontEnd, height: f64) -> f64 {
    height * frontend.fov.tan()
}

/// Solves `gain_at_radius(r) = target` for `r` by bisection on
/// `[0, fov_radius]`. Gain is strictly decreasing in `r` on that interval.
pub fn radius_for_gain(target: f64, frontend: &ReceiverFrontEnd, height: f64) -> Result<f64> {
    let r_max = fov_radius(frontend, height);
    let g_max = gain_at_radius(0.0, frontend, height)?;
    let g_min = gain_at_radius(r_max, frontend, height)?;
    if !(target <= g_max && target >= g_min) {
        return Err(Error::RootNotBracketed(format!(
            "gain {target:e} outside reachable range [{g_min:e}, {g_max:e}] at height {height} m"
        )));
    }
    let (mut lo, mut hi) = (0.0_f64, r_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gain_at_radius(mid, frontend, height)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Places one user per target gain on the table plane, spreading them at
/// equal azimuth steps around the point below the LED.
pub fn anchor_positions(
    gains: &[f64],
    frontend: &ReceiverFrontEnd,
    led: Point3,
    height: f64,
) -> Result<Vec<Point3>> {
    let n = gains.len().max(1) as f64;
    gains
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let r = radius_for_gain(g, frontend, height)?;
            let theta = 2.0 * PI * i as f64 / n;
            Ok(Point3::new(
                led.x + r * theta.cos(),
                led.y + r * theta.sin(),
                led.z - height,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lambertian_order_reference_angles() {
        assert_relative_eq!(
            lambertian_order(60f64.to_radians()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            lambertian_order(45f64.to_radians()).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        // ln2 / -ln(cos 50°), evaluated independently in double precision.
        assert_relative_eq!(
            lambertian_order(50f64.to_radians()).unwrap(),
            1.568_415_930_446_632_7,
            max_relative = 1e-14
        );
        assert!(lambertian_order(0.0).is_err());
        assert!(lambertian_order(FRAC_PI_2).is_err());
        assert!(lambertian_order(-0.1).is_err());
    }

    #[test]
    fn concentrator_branches() {
        let d = f64::to_radians;
        assert_eq!(concentrator_gain(d(60.0), d(45.0), 1.5).unwrap(), 0.0);
        assert_relative_eq!(
            concentrator_gain(d(30.0), d(90.0), 1.0).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            concentrator_gain(0.0, d(45.0), 1.5).unwrap(),
            4.5,
            epsilon = 1e-12
        );
        assert!(concentrator_gain(-0.1, d(45.0), 1.5).is_err());
    }

    #[test]
    fn gain_outside_fov_is_zero() {
        let fe = ReceiverFrontEnd::nominal();
        let led = Point3::new(2.0, 2.0, 3.0);
        let pd = Point3::new(4.0, 4.0, 2.5);
        let g = LinkGeometry::between(led, pd).unwrap();
        assert!(g.incidence_angle > fe.fov);
        assert_eq!(channel_gain(&g, &fe).unwrap(), 0.0);
    }

    #[test]
    fn nominal_gain_term_by_term() {
        // LED (2,2,3), PD (2,2,0.75): d = 2.25, both angles 0.
        // m = 1.5684159, R0 = (m+1)/2pi, g = 4.5, A = 1e-4, Ts = 1.
        let fe = ReceiverFrontEnd::nominal();
        let g =
            LinkGeometry::between(Point3::new(2.0, 2.0, 3.0), Point3::new(2.0, 2.0, 0.75)).unwrap();
        let m = 1.568_415_930_446_632_7_f64;
        let expected = 1.0e-4 / (2.25 * 2.25) * (m + 1.0) / (2.0 * PI) * 4.5;
        assert_relative_eq!(
            channel_gain(&g, &fe).unwrap(),
            expected,
            max_relative = 1e-7
        );
        assert_relative_eq!(expected, 3.632e-5, max_relative = 1e-3);
    }

    #[test]
    fn simplified_matches_full_model_in_fov() {
        let fe = ReceiverFrontEnd::nominal();
        let m = fe.lambertian_order().unwrap();
        let z = 2.25;
        let w = lumped_constant(&fe, z).unwrap();
        assert_eq!(simplified_gain(1.0, 1.0, 1.0).unwrap(), 1.0);
        for r in [0.0, 0.3, 1.0, 2.0] {
            let led = Point3::new(0.0, 0.0, z);
            let pd = Point3::new(r, 0.0, 0.0);
            let geom = LinkGeometry::between(led, pd).unwrap();
            let full = channel_gain(&geom, &fe).unwrap();
            let simple = simplified_gain(geom.distance, w, m).unwrap();
            assert_relative_eq!(full, simple, max_relative = 1e-12);
        }
        assert!(simplified_gain(0.0, w, m).is_err());
    }

    #[test]
    fn noise_terms() {
        let env = NoiseEnvironment::default();
        let zero_bg = NoiseEnvironment {
            background_current: 0.0,
            ..env
        };
        assert_eq!(shot_variance(&zero_bg, 1.0, 1e-4, 0.0), 0.0);
        // 2 * 1.602e-19 * 1e7 * 1e-4 * 0.562
        assert_relative_eq!(
            shot_variance(&env, 1.0, 0.0, 0.0),
            1.800_648e-16,
            max_relative = 1e-12
        );
        let wide = NoiseEnvironment {
            bandwidth: 2.0 * env.bandwidth,
            ..env
        };
        assert_relative_eq!(
            shot_variance(&wide, 1.0, 3e-5, 0.1),
            2.0 * shot_variance(&env, 1.0, 3e-5, 0.1),
            max_relative = 1e-14
        );

        let no_cap = NoiseEnvironment {
            capacitance_per_area: 0.0,
            ..env
        };
        assert_eq!(thermal_variance(&no_cap, 1e-4), 0.0);

        let a = 1e-4;
        let total = thermal_variance(&env, a);
        let total_2a = thermal_variance(&env, 2.0 * a);
        // Split into the two terms by solving t1 + t2 = T(A), 2 t1 + 4 t2 = T(2A).
        let t2 = (total_2a - 2.0 * total) / 2.0;
        let t1 = total - t2;
        let kt = env.boltzmann * env.temperature;
        let t1_direct = 8.0 * PI * kt / env.open_loop_gain
            * env.capacitance_per_area
            * a
            * env.noise_bw_factor
            * env.bandwidth.powi(2);
        assert_relative_eq!(t1, t1_direct, max_relative = 1e-9);
        assert!(t2 > 0.0);

        let v = env.total_variance(1.0, 3e-5, 0.1, a);
        assert_relative_eq!(
            v,
            shot_variance(&env, 1.0, 3e-5, 0.1) + total,
            max_relative = 1e-15
        );
        assert!(v >= total && v >= shot_variance(&env, 1.0, 3e-5, 0.1));
    }

    #[test]
    fn bisection_agrees_with_closed_form_inverse() {
        let fe = ReceiverFrontEnd::nominal();
        let z = DEFAULT_TABLE_DEPTH;
        let m = fe.lambertian_order().unwrap();
        let w = lumped_constant(&fe, z).unwrap();
        for target in [0.2835e-4, 0.4787e-4, 0.5272e-4] {
            let r = radius_for_gain(target, &fe, z).unwrap();
            let d = (w / target).powf(1.0 / (m + 3.0));
            let r_closed = (d * d - z * z).sqrt();
            assert_relative_eq!(r, r_closed, max_relative = 1e-9);
        }
    }

    #[test]
    fn table_gains_unreachable_at_two_and_a_quarter_metres() {
        let fe = ReceiverFrontEnd::nominal();
        assert!(radius_for_gain(0.4787e-4, &fe, 2.25).is_err());
        assert!(radius_for_gain(0.2835e-4, &fe, 2.25).is_ok());
    }

    #[test]
    fn anchors_reproduce_table_gains() {
        let fe = ReceiverFrontEnd::nominal();
        let led = Point3::new(2.0, 2.0, 3.0);
        let gains = [0.2835e-4, 0.4787e-4, 0.5272e-4];
        let pos = anchor_positions(&gains, &fe, led, DEFAULT_TABLE_DEPTH).unwrap();
        for (p, &h) in pos.iter().zip(&gains) {
            let g = channel_gain(&LinkGeometry::between(led, *p).unwrap(), &fe).unwrap();
            assert!((g - h).abs() < 1e-8 * h.max(1.0) && (g - h).abs() / h < 1e-9);
        }
    }

    #[test]
    fn gain_nonincreasing_with_distance_when_aligned() {
        let fe = ReceiverFrontEnd::nominal();
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let h = i as f64 * 0.1;
            let g = channel_gain(
                &LinkGeometry::between(Point3::new(0.0, 0.0, h), Point3::new(0.0, 0.0, 0.0))
                    .unwrap(),
                &fe,
            )
            .unwrap();
            assert!(g <= prev);
            prev = g;
        }
    }
}
