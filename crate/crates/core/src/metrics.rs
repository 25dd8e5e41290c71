//! Pure link, route and contention formulas shared by the protocol logic and
//! by the test suites. Everything in this module is a function of its
//! arguments only: no clocks, no RNG, no shared state. Randomized tie-break
//! jitter is injected by the caller as a plain number so results stay
//! reproducible.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;

/// Sentinel lifetime for degenerate "link never expires at this relative
/// motion" cases. Compares larger than any finite lifetime the simulator can
/// produce; finite results are clamped to it.
pub const LLT_CAP: f64 = 3600.0;

/// Sentinel expiration for zero-relative-velocity vehicle pairs currently in
/// range of each other. Same convention as [`LLT_CAP`].
pub const ELS_CAP: f64 = 3600.0;

/// Position and velocity of one vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub x: f64,
    pub y: f64,
    /// meters/second, non-negative
    pub speed: f64,
    /// radians, normalized to [0, 2*pi)
    pub heading: f64,
}

impl Kinematics {
    pub fn new(x: f64, y: f64, speed: f64, heading: f64) -> Self {
        debug_assert!(speed.is_finite() && speed >= 0.0, "speed must be finite and >= 0");
        Kinematics { x, y, speed, heading: normalize_heading(heading) }
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.speed * self.heading.cos(), self.speed * self.heading.sin())
    }

    pub fn distance_to(&self, other: &Kinematics) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Wraps an angle into [0, 2*pi).
pub fn normalize_heading(heading: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let wrapped = heading.rem_euclid(two_pi);
    // rem_euclid can return exactly two_pi after rounding for tiny negatives
    if wrapped >= two_pi {
        0.0
    } else {
        wrapped
    }
}

/// Smallest absolute difference between two headings, in [0, pi].
pub fn heading_difference(a: f64, b: f64) -> f64 {
    let diff = (normalize_heading(a) - normalize_heading(b)).abs();
    diff.min(2.0 * PI - diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    /// A speed window was queried before it held enough samples to estimate
    /// a deviation. Callers defer contention for the current interval.
    InsufficientSamples,
    /// A fading-shape value outside the supported {1, 1.5, 3} set.
    UnsupportedShape,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::InsufficientSamples => {
                write!(f, "speed window holds fewer than 2 samples")
            }
            MetricsError::UnsupportedShape => {
                write!(f, "unsupported fading shape (expected 1, 1.5 or 3)")
            }
        }
    }
}

impl std::error::Error for MetricsError {}

// ============================================================================
// LTE link lifetime and speed stability
// ============================================================================

/// Remaining time a vehicle stays inside the cellular coverage disk, assuming
/// it keeps its current speed radially outward: (r4g - dist) / speed.
///
/// Stationary and near-stationary vehicles (speed < 0.1 m/s) get [`LLT_CAP`];
/// finite results are clamped to the same cap so the sentinel stays the
/// largest representable lifetime.
pub fn lte_link_lifetime(r4g: f64, dist: f64, speed: f64) -> f64 {
    assert!(
        dist <= r4g,
        "lte_link_lifetime called outside coverage: dist {dist} > r4g {r4g}"
    );
    assert!(dist >= 0.0 && speed >= 0.0, "negative distance or speed");
    if speed < 0.1 {
        return LLT_CAP;
    }
    ((r4g - dist) / speed).min(LLT_CAP)
}

/// Sliding window of recent speed samples for one vehicle.
#[derive(Debug, Clone)]
pub struct SpeedWindow {
    samples: VecDeque<f64>,
    capacity: usize,
    /// Seconds between samples; bookkeeping for the sampling cadence, not
    /// used by the deviation itself.
    pub sample_interval: f64,
}

impl SpeedWindow {
    pub fn new(capacity: usize, sample_interval: f64) -> Self {
        assert!(capacity >= 2, "window capacity must allow a deviation estimate");
        SpeedWindow { samples: VecDeque::with_capacity(capacity), capacity, sample_interval }
    }

    /// Appends a sample, evicting the oldest once the window is full.
    pub fn push(&mut self, speed: f64) {
        debug_assert!(speed >= 0.0, "negative speed sample");
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(speed);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Relative standard deviation of the windowed speeds: population standard
    /// deviation over the mean, clamped to [0, 1]. A near-zero mean (parked
    /// vehicle) reports 0 rather than dividing by nothing.
    pub fn rsd(&self) -> Result<f64, MetricsError> {
        let n = self.samples.len();
        if n < 2 {
            return Err(MetricsError::InsufficientSamples);
        }
        let mean = self.samples.iter().sum::<f64>() / n as f64;
        if mean < 0.1 {
            return Ok(0.0);
        }
        let var = self.samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64;
        Ok((var.sqrt() / mean).clamp(0.0, 1.0))
    }
}

/// Weighting constants for gateway and relay contention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionWeights {
    /// Gateway contention: weight given to the coverage-lifetime term; the
    /// speed-stability term gets 1 - mu.
    pub mu: f64,
    /// Relay contention: weight of the link-stability term.
    pub alpha: f64,
    /// Relay contention: weight of the forward-progress term.
    pub beta: f64,
    /// Relay contention: weight of the free-buffer term.
    pub gamma: f64,
    /// Seconds scale at which link stability saturates: S_e = 1 - e^(-els/A).
    pub stability_scale: f64,
    /// Maximum gateway-contention defer window, seconds.
    pub gateway_window: f64,
    /// Maximum relay-contention defer window, seconds.
    pub relay_window: f64,
}

impl Default for ContentionWeights {
    fn default() -> Self {
        ContentionWeights {
            mu: 0.5,
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.2,
            stability_scale: 10.0,
            gateway_window: 0.1,
            relay_window: 0.02,
        }
    }
}

impl ContentionWeights {
    /// Range and sum constraints; returns the first violated constraint.
    pub fn check(&self) -> Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.mu) {
            return Err(format!("weights.mu = {} outside [0, 1]", self.mu));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !unit(v) {
                return Err(format!("weights.{name} = {v} outside [0, 1]"));
            }
        }
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("weights.alpha+beta+gamma = {sum}, expected 1"));
        }
        for (name, v) in [
            ("stability_scale", self.stability_scale),
            ("gateway_window", self.gateway_window),
            ("relay_window", self.relay_window),
        ] {
            if !(v > 0.0) {
                return Err(format!("weights.{name} = {v} must be > 0"));
            }
        }
        Ok(())
    }
}

/// Outcome of one gateway-contention evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayContention {
    pub weight: f64,
    pub defer: f64,
}

/// Scores a coverage-eligible vehicle's fitness to become the gateway and the
/// matching defer delay: fitter candidates broadcast sooner.
///
/// weight = mu * min(llt/llt_max, 1) + (1 - mu) * (1 - rsd)
/// defer  = gateway_window * (1 - weight)
pub fn gateway_contention(
    llt: f64,
    llt_max: f64,
    rsd: f64,
    weights: &ContentionWeights,
) -> GatewayContention {
    debug_assert!(llt >= 0.0 && llt_max > 0.0);
    debug_assert!((0.0..=1.0).contains(&rsd));
    let lifetime_term = (llt / llt_max).min(1.0);
    let weight = weights.mu * lifetime_term + (1.0 - weights.mu) * (1.0 - rsd);
    GatewayContention { weight, defer: weights.gateway_window * (1.0 - weight) }
}

// ============================================================================
// Fading channel closed forms
// ============================================================================

/// Distance-banded Nakagami fading shape: severe multipath relief close in,
/// Rayleigh-like far out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NakagamiShape {
    M1,
    M15,
    M3,
}

impl NakagamiShape {
    /// Shape used for a link of length `d` meters.
    pub fn from_distance(d: f64) -> Self {
        debug_assert!(d >= 0.0);
        if d < 50.0 {
            NakagamiShape::M3
        } else if d < 150.0 {
            NakagamiShape::M15
        } else {
            NakagamiShape::M1
        }
    }

    pub fn try_from_value(m: f64) -> Result<Self, MetricsError> {
        if m == 1.0 {
            Ok(NakagamiShape::M1)
        } else if m == 1.5 {
            Ok(NakagamiShape::M15)
        } else if m == 3.0 {
            Ok(NakagamiShape::M3)
        } else {
            Err(MetricsError::UnsupportedShape)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            NakagamiShape::M1 => 1.0,
            NakagamiShape::M15 => 1.5,
            NakagamiShape::M3 => 3.0,
        }
    }
}

/// Probability that a frame sent over `d` meters is received when the nominal
/// (deterministic) range is `r` meters, under the banded Nakagami model.
///
/// With u = (d/r)^2 the closed forms per shape are
///   m=1:   e^(-u)
///   m=3:   e^(-3u) * (1 + 3u + 4.5 u^2)
///   m=1.5: average of the m=1 and m=2 forms, (e^(-2u)(1+2u) + e^(-u)) / 2
/// The half-integer band deliberately uses the averaged integer forms rather
/// than the exact half-integer gamma tail; the whole model is internally
/// consistent on that convention (see `range_degradation`).
pub fn reception_probability(d: f64, r: f64) -> f64 {
    debug_assert!(d >= 0.0 && r > 0.0);
    let u = (d / r).powi(2);
    let p = match NakagamiShape::from_distance(d) {
        NakagamiShape::M1 => (-u).exp(),
        NakagamiShape::M3 => (-3.0 * u).exp() * (1.0 + 3.0 * u + 4.5 * u * u),
        NakagamiShape::M15 => 0.5 * (((-2.0 * u).exp() * (1.0 + 2.0 * u)) + (-u).exp()),
    };
    p.clamp(0.0, 1.0)
}

/// Fraction of the nominal range lost to fading for a given shape: the
/// expected usable range is r * (1 - degradation). Closed forms of the
/// expected-range integral per shape:
///   m=1:   1 - sqrt(pi)/2
///   m=1.5: 1 - sqrt(pi)/16 * (3*sqrt(2) + 4)
///   m=3:   1 - 5*sqrt(3)*sqrt(pi)/16
pub fn range_degradation(shape: NakagamiShape) -> f64 {
    let sqrt_pi = PI.sqrt();
    match shape {
        NakagamiShape::M1 => 1.0 - sqrt_pi / 2.0,
        NakagamiShape::M15 => 1.0 - sqrt_pi / 16.0 * (3.0 * 2.0f64.sqrt() + 4.0),
        NakagamiShape::M3 => 1.0 - 5.0 * 3.0f64.sqrt() * sqrt_pi / 16.0,
    }
}

/// Expected usable transmission range under fading: r * (1 - degradation).
/// Strictly less than the nominal range.
pub fn expected_range(r: f64, shape: NakagamiShape) -> f64 {
    debug_assert!(r > 0.0);
    r * (1.0 - range_degradation(shape))
}

/// Nominal range plus the fading quantities derived from it for one shape.
/// The transmit power, antenna gains, carrier wavelength and system losses of
/// the underlying free-space derivation all cancel out of the closed forms,
/// so only the range and shape survive as runtime parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub max_range: f64,
    pub shape: NakagamiShape,
    pub degradation: f64,
    pub expected_range: f64,
}

impl ChannelParams {
    pub fn new(max_range: f64, shape: NakagamiShape) -> Self {
        assert!(max_range > 0.0);
        let degradation = range_degradation(shape);
        ChannelParams {
            max_range,
            shape,
            degradation,
            expected_range: max_range * (1.0 - degradation),
        }
    }
}

// ============================================================================
// Link expiration and route metrics
// ============================================================================

/// Seconds until the straight-line separation of two vehicles first exceeds
/// `range`, assuming both keep their current velocity.
///
/// Solves |p_i(t) - p_j(t)| = range for the outgoing crossing. A pair with no
/// relative motion never separates: in range that yields [`ELS_CAP`], out of
/// range 0. A pair whose miss distance exceeds the range (negative square
/// root argument), or that is already out of range and separating, yields 0.
pub fn link_expiration(i: &Kinematics, j: &Kinematics, range: f64) -> f64 {
    debug_assert!(range > 0.0);
    let (vx_i, vy_i) = i.velocity();
    let (vx_j, vy_j) = j.velocity();
    let rel_vx = vx_i - vx_j;
    let rel_vy = vy_i - vy_j;
    let dx = i.x - j.x;
    let dy = i.y - j.y;

    let rel_speed_sq = rel_vx * rel_vx + rel_vy * rel_vy;
    if rel_speed_sq < 1e-12 {
        return if (dx * dx + dy * dy).sqrt() <= range { ELS_CAP } else { 0.0 };
    }

    let cross = rel_vx * dy - dx * rel_vy;
    let radicand = rel_speed_sq * range * range - cross * cross;
    if radicand < 0.0 {
        return 0.0;
    }
    let dot = rel_vx * dx + rel_vy * dy;
    let els = (radicand.sqrt() - dot) / rel_speed_sq;
    els.clamp(0.0, ELS_CAP)
}

/// Stability of a multi-link route: its weakest (minimum) link expiration.
pub fn route_stability(els_values: &[f64]) -> f64 {
    assert!(!els_values.is_empty(), "route_stability needs at least one link");
    els_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Forward progress of a rebroadcast candidate: distance covered by the hop,
/// normalized by the usable range and capped at 1.
pub fn effective_distance_rate(d: f64, range: f64) -> f64 {
    debug_assert!(d >= 0.0 && range > 0.0);
    (d.min(range)) / range
}

/// Fraction of the interface queue still free.
pub fn available_buffer(occupancy: usize, capacity: usize) -> f64 {
    assert!(capacity > 0 && occupancy <= capacity, "occupancy {occupancy} exceeds capacity {capacity}");
    1.0 - occupancy as f64 / capacity as f64
}

/// Outcome of one relay-contention evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayContention {
    /// Saturating link-stability score in [0, 1].
    pub stability: f64,
    pub weight: f64,
    pub defer: f64,
}

/// Scores a rebroadcast candidate and derives its defer delay. `jitter01` is
/// a caller-supplied draw in [0, 1) stretched over one percent of the relay
/// window; it breaks exact weight ties between symmetric candidates. Pass 0
/// for the undithered value.
///
/// stability = 1 - e^(-els/stability_scale)
/// weight    = alpha * stability + beta * edr + gamma * abq
/// defer     = relay_window * (1 - weight) + jitter01 * relay_window / 100
pub fn relay_contention(
    els: f64,
    edr: f64,
    abq: f64,
    weights: &ContentionWeights,
    jitter01: f64,
) -> RelayContention {
    debug_assert!(els >= 0.0);
    debug_assert!((0.0..=1.0).contains(&edr) && (0.0..=1.0).contains(&abq));
    debug_assert!((0.0..1.0).contains(&jitter01) || jitter01 == 0.0);
    let stability = 1.0 - (-els / weights.stability_scale).exp();
    let weight = weights.alpha * stability + weights.beta * edr + weights.gamma * abq;
    let defer =
        weights.relay_window * (1.0 - weight) + jitter01 * weights.relay_window / 100.0;
    RelayContention { stability, weight, defer }
}

/// Seconds from now until a flow should be handed over, given the remaining
/// stability of the route in use and the estimated discovery latency `delta`.
/// Returns `None` for the never-expires sentinel: no handover timer needed.
pub fn critical_time(ers: f64, delta: f64) -> Option<f64> {
    debug_assert!(ers >= 0.0 && delta >= 0.0);
    if ers >= ELS_CAP {
        return None;
    }
    Some((ers - delta).max(0.0))
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;

    // ------------------------------------------------------------------
    // Independent oracles. Written against the model definitions, not the
    // implementation: the expected-range integrals are integrated
    // numerically, and link expiration is reproduced by brute-force
    // kinematic stepping.
    // ------------------------------------------------------------------

    /// Integrand of the normalized expected-range integral for one shape,
    /// x = d/r. These are the reception-probability curves themselves; the
    /// expected usable range is their integral from 0 to infinity.
    fn range_integrand(shape: NakagamiShape, x: f64) -> f64 {
        let u = x * x;
        match shape {
            NakagamiShape::M1 => (-u).exp(),
            NakagamiShape::M3 => (-3.0 * u).exp() * (1.0 + 3.0 * u + 4.5 * u * u),
            NakagamiShape::M15 => 0.5 * ((-2.0 * u).exp() * (1.0 + 2.0 * u) + (-u).exp()),
        }
    }

    /// Simpson quadrature of the normalized expected range; the integrands
    /// decay like e^(-x^2) so truncating at x = 12 is exact to machine
    /// precision at this tolerance.
    fn quadrature_expected_range_fraction(shape: NakagamiShape) -> f64 {
        let upper = 12.0;
        let steps = 120_000; // even
        let h = upper / steps as f64;
        let mut acc = range_integrand(shape, 0.0) + range_integrand(shape, upper);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * range_integrand(shape, k as f64 * h);
        }
        acc * h / 3.0
    }

    /// Steps both vehicles forward at `dt` until their separation exceeds
    /// the range, returning the crossing time.
    fn stepping_link_expiration(i: &Kinematics, j: &Kinematics, range: f64, dt: f64) -> f64 {
        let (vxi, vyi) = i.velocity();
        let (vxj, vyj) = j.velocity();
        let mut t = 0.0;
        loop {
            let xi = i.x + vxi * t;
            let yi = i.y + vyi * t;
            let xj = j.x + vxj * t;
            let yj = j.y + vyj * t;
            let sep = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
            if sep > range {
                return t;
            }
            t += dt;
            if t > ELS_CAP {
                return ELS_CAP;
            }
        }
    }

    // ------------------------------------------------------------------
    // LTE lifetime / speed deviation
    // ------------------------------------------------------------------

    #[test]
    fn lte_lifetime_basic_cases() {
        assert!((lte_link_lifetime(7000.0, 1000.0, 30.0) - 200.0).abs() < 1e-12);
        assert_eq!(lte_link_lifetime(7000.0, 7000.0, 30.0), 0.0);
        assert_eq!(lte_link_lifetime(7000.0, 1000.0, 0.0), LLT_CAP);
        // slow but moving: finite value still respects the cap ordering
        assert_eq!(lte_link_lifetime(7000.0, 0.0, 0.11), LLT_CAP);
    }

    #[test]
    #[should_panic(expected = "outside coverage")]
    fn lte_lifetime_rejects_out_of_coverage() {
        lte_link_lifetime(7000.0, 7001.0, 30.0);
    }

    #[test]
    fn rsd_matches_hand_computation() {
        let mut w = SpeedWindow::new(10, 1.0);
        for s in [10.0, 20.0, 30.0] {
            w.push(s);
        }
        let rsd = w.rsd().unwrap();
        assert!((rsd - 0.40825).abs() < 1e-5, "rsd = {rsd}");
    }

    #[test]
    fn rsd_zero_variance_and_parked() {
        let mut w = SpeedWindow::new(10, 1.0);
        for s in [20.0, 20.0, 20.0] {
            w.push(s);
        }
        assert_eq!(w.rsd().unwrap(), 0.0);

        let mut parked = SpeedWindow::new(10, 1.0);
        for _ in 0..3 {
            parked.push(0.0);
        }
        assert_eq!(parked.rsd().unwrap(), 0.0, "near-zero mean must not divide");
    }

    #[test]
    fn rsd_insufficient_samples() {
        let mut w = SpeedWindow::new(10, 1.0);
        assert_eq!(w.rsd(), Err(MetricsError::InsufficientSamples));
        w.push(12.0);
        assert_eq!(w.rsd(), Err(MetricsError::InsufficientSamples));
        w.push(12.0);
        assert!(w.rsd().is_ok());
    }

    #[test]
    fn rsd_scale_invariant_and_clamped() {
        let mut small = SpeedWindow::new(10, 1.0);
        let mut big = SpeedWindow::new(10, 1.0);
        for s in [4.0, 9.0, 13.0, 22.0, 28.0] {
            small.push(s);
            big.push(s * 7.5);
        }
        let a = small.rsd().unwrap();
        let b = big.rsd().unwrap();
        assert!((a - b).abs() < 1e-12, "scaling all samples changed rsd: {a} vs {b}");

        // extreme spread exceeds 1 before clamping
        let mut spread = SpeedWindow::new(10, 1.0);
        for s in [1.0, 1.0, 100.0] {
            spread.push(s);
        }
        assert_eq!(spread.rsd().unwrap(), 1.0);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut w = SpeedWindow::new(3, 1.0);
        for s in [1.0, 2.0, 3.0, 4.0] {
            w.push(s);
        }
        assert_eq!(w.len(), 3);
        // window now holds [2, 3, 4]; mean 3
        let rsd = w.rsd().unwrap();
        let expected = ((2.0f64 / 3.0).sqrt() / 3.0).clamp(0.0, 1.0);
        assert!((rsd - expected).abs() < 1e-12);
    }

    // ------------------------------------------------------------------
    // Gateway contention
    // ------------------------------------------------------------------

    #[test]
    fn gateway_contention_examples() {
        let w = ContentionWeights::default();
        let best = gateway_contention(100.0, 100.0, 0.0, &w);
        assert!((best.weight - 1.0).abs() < 1e-12);
        assert!(best.defer.abs() < 1e-12);

        let worst = gateway_contention(0.0, 100.0, 1.0, &w);
        assert!(worst.weight.abs() < 1e-12);
        assert!((worst.defer - 0.1).abs() < 1e-12);

        let mid = gateway_contention(50.0, 100.0, 0.2, &w);
        assert!((mid.weight - 0.65).abs() < 1e-12, "weight = {}", mid.weight);
        assert!((mid.defer - 0.035).abs() < 1e-12, "defer = {}", mid.defer);
    }

    #[test]
    fn gateway_contention_lifetime_ratio_clamps() {
        let w = ContentionWeights::default();
        let over = gateway_contention(500.0, 100.0, 0.0, &w);
        assert!((over.weight - 1.0).abs() < 1e-12, "llt/llt_max must clamp at 1");
    }

    #[test]
    fn gateway_contention_monotonicity() {
        let w = ContentionWeights::default();
        let mut prev = -1.0;
        for k in 0..=20 {
            let llt = 5.0 * k as f64;
            let c = gateway_contention(llt, 100.0, 0.3, &w);
            assert!(c.weight >= prev, "weight must not decrease in llt");
            prev = c.weight;
        }
        let mut prev_defer = -1.0;
        for k in 0..=20 {
            let rsd = k as f64 / 20.0;
            let c = gateway_contention(50.0, 100.0, rsd, &w);
            assert!(c.defer >= prev_defer, "defer must not decrease as rsd worsens");
            prev_defer = c.defer;
        }
    }

    // ------------------------------------------------------------------
    // Fading shapes and reception
    // ------------------------------------------------------------------

    #[test]
    fn shape_band_boundaries() {
        assert_eq!(NakagamiShape::from_distance(0.0), NakagamiShape::M3);
        assert_eq!(NakagamiShape::from_distance(40.0), NakagamiShape::M3);
        assert_eq!(NakagamiShape::from_distance(49.999), NakagamiShape::M3);
        assert_eq!(NakagamiShape::from_distance(50.0), NakagamiShape::M15);
        assert_eq!(NakagamiShape::from_distance(149.999), NakagamiShape::M15);
        assert_eq!(NakagamiShape::from_distance(150.0), NakagamiShape::M1);
        assert_eq!(NakagamiShape::from_distance(160.0), NakagamiShape::M1);
    }

    #[test]
    fn shape_value_round_trip() {
        for shape in [NakagamiShape::M1, NakagamiShape::M15, NakagamiShape::M3] {
            assert_eq!(NakagamiShape::try_from_value(shape.value()), Ok(shape));
        }
        assert_eq!(NakagamiShape::try_from_value(2.0), Err(MetricsError::UnsupportedShape));
        assert_eq!(NakagamiShape::try_from_value(0.0), Err(MetricsError::UnsupportedShape));
    }

    #[test]
    fn reception_probability_pinned_values() {
        assert_eq!(reception_probability(0.0, 250.0), 1.0);
        let at_range = reception_probability(250.0, 250.0);
        assert!((at_range - 0.36788).abs() < 1e-4, "p(250, 250) = {at_range}");
        let mid = reception_probability(100.0, 250.0);
        assert!((mid - 0.90533).abs() < 1e-4, "p(100, 250) = {mid}");
    }

    #[test]
    fn reception_probability_bounds_and_branch_monotonicity() {
        for r in [100.0, 250.0, 350.0, 450.0] {
            let at_range = reception_probability(r, r);
            assert!(at_range < 0.5, "p(d=R) should be lossy, got {at_range} at R={r}");
            // strictly decreasing within each band
            for band in [(0.0, 49.9), (50.0, 149.9), (150.0, 2.0 * r)] {
                let mut prev = f64::INFINITY;
                let mut d = band.0;
                while d <= band.1 {
                    let p = reception_probability(d, r);
                    assert!((0.0..=1.0).contains(&p));
                    assert!(p < prev, "p must strictly decrease within the band");
                    prev = p;
                    d += (band.1 - band.0) / 37.0 + 1e-9;
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Range degradation against the quadrature oracle
    // ------------------------------------------------------------------

    #[test]
    fn degradation_matches_quadrature_and_pinned_values() {
        let cases = [
            (NakagamiShape::M1, 0.11377),
            (NakagamiShape::M15, 0.08689),
            (NakagamiShape::M3, 0.04063),
        ];
        for (shape, pinned) in cases {
            let closed = range_degradation(shape);
            let oracle = 1.0 - quadrature_expected_range_fraction(shape);
            assert!(
                (closed - oracle).abs() < 1e-9,
                "closed form {closed} vs quadrature {oracle} for {shape:?}"
            );
            assert!(
                (closed - pinned).abs() < 1e-4,
                "degradation {closed} vs pinned {pinned} for {shape:?}"
            );
        }
    }

    #[test]
    fn degradation_strictly_decreasing_in_shape() {
        let e1 = range_degradation(NakagamiShape::M1);
        let e15 = range_degradation(NakagamiShape::M15);
        let e3 = range_degradation(NakagamiShape::M3);
        assert!(e1 > e15 && e15 > e3, "{e1} > {e15} > {e3} violated");
    }

    #[test]
    fn expected_range_pinned_values() {
        let cases = [
            (NakagamiShape::M1, 221.56),
            (NakagamiShape::M15, 228.28),
            (NakagamiShape::M3, 239.84),
        ];
        for (shape, pinned) in cases {
            let got = expected_range(250.0, shape);
            assert!((got - pinned).abs() < 0.01, "expected_range = {got}, pinned {pinned}");
            assert!(got < 250.0);
        }
    }

    #[test]
    fn channel_params_consistent() {
        let p = ChannelParams::new(250.0, NakagamiShape::M15);
        assert_eq!(p.degradation, range_degradation(NakagamiShape::M15));
        assert!((p.expected_range - expected_range(250.0, NakagamiShape::M15)).abs() < 1e-12);
        assert!(p.expected_range <= p.max_range);
    }

    // ------------------------------------------------------------------
    // Link expiration against the stepping oracle
    // ------------------------------------------------------------------

    #[test]
    fn link_expiration_pinned_cases() {
        let i = Kinematics::new(0.0, 0.0, 20.0, 0.0);
        let j = Kinematics::new(100.0, 0.0, 10.0, 0.0);
        let els = link_expiration(&i, &j, 250.0);
        assert!((els - 35.0).abs() < 1e-9, "els = {els}");

        let i = Kinematics::new(0.0, 0.0, 10.0, 0.0);
        let j = Kinematics::new(50.0, 0.0, 20.0, 0.0);
        let els = link_expiration(&i, &j, 250.0);
        assert!((els - 20.0).abs() < 1e-9, "els = {els}");
    }

    #[test]
    fn link_expiration_degenerate_cases() {
        // identical velocities, currently in range
        let i = Kinematics::new(0.0, 0.0, 15.0, 0.3);
        let j = Kinematics::new(80.0, 60.0, 15.0, 0.3);
        assert_eq!(link_expiration(&i, &j, 250.0), ELS_CAP);

        // identical velocities, out of range
        let far = Kinematics::new(400.0, 0.0, 15.0, 0.3);
        assert_eq!(link_expiration(&i, &far, 250.0), 0.0);

        // passing by at a miss distance beyond the range: broken now
        let mover = Kinematics::new(0.0, 0.0, 10.0, 0.0);
        let bystander = Kinematics::new(500.0, 300.0, 0.0, 0.0);
        assert_eq!(link_expiration(&mover, &bystander, 250.0), 0.0);

        // out of range and separating: also 0
        let leaving = Kinematics::new(300.0, 0.0, 10.0, 0.0);
        let origin = Kinematics::new(0.0, 0.0, 0.0, 0.0);
        assert_eq!(link_expiration(&leaving, &origin, 250.0), 0.0);
    }

    #[test]
    fn link_expiration_separation_at_expiry_is_range() {
        let cases = [
            (
                Kinematics::new(0.0, 0.0, 20.0, 0.0),
                Kinematics::new(100.0, 0.0, 10.0, 0.0),
            ),
            (
                Kinematics::new(-40.0, 12.0, 25.0, 0.4),
                Kinematics::new(90.0, -30.0, 12.0, 3.6),
            ),
            (
                Kinematics::new(10.0, 5.0, 30.0, 1.2),
                Kinematics::new(-60.0, 45.0, 8.0, 5.1),
            ),
        ];
        for (i, j) in cases {
            let range = 250.0;
            let els = link_expiration(&i, &j, range);
            assert!(els > 0.0 && els < ELS_CAP);
            let (vxi, vyi) = i.velocity();
            let (vxj, vyj) = j.velocity();
            let sep = ((i.x + vxi * els - j.x - vxj * els).powi(2)
                + (i.y + vyi * els - j.y - vyj * els).powi(2))
            .sqrt();
            assert!((sep - range).abs() < 1e-6, "separation at expiry = {sep}");
        }
    }

    #[test]
    fn link_expiration_agrees_with_stepping_oracle_spot_checks() {
        let cases = [
            (
                Kinematics::new(0.0, 0.0, 20.0, 0.0),
                Kinematics::new(100.0, 0.0, 10.0, 0.0),
            ),
            (
                Kinematics::new(0.0, 0.0, 10.0, 0.0),
                Kinematics::new(50.0, 0.0, 20.0, 0.0),
            ),
            (
                Kinematics::new(-120.0, 20.0, 28.0, 0.1),
                Kinematics::new(100.0, -10.0, 22.0, 3.3),
            ),
        ];
        for (i, j) in cases {
            let range = 250.0;
            let analytic = link_expiration(&i, &j, range);
            let stepped = stepping_link_expiration(&i, &j, range, 1e-3);
            assert!(
                (analytic - stepped).abs() <= 0.05,
                "analytic {analytic} vs stepped {stepped}"
            );
        }
    }

    // ------------------------------------------------------------------
    // Route metrics and relay contention
    // ------------------------------------------------------------------

    #[test]
    fn route_stability_is_min() {
        assert_eq!(route_stability(&[35.0]), 35.0);
        assert_eq!(route_stability(&[35.0, 20.0, 120.0]), 20.0);
        assert_eq!(route_stability(&[ELS_CAP, ELS_CAP]), ELS_CAP);
        // adding a link never increases stability
        assert!(route_stability(&[35.0, 20.0, 120.0, 5.0]) <= route_stability(&[35.0, 20.0, 120.0]));
    }

    #[test]
    #[should_panic(expected = "at least one link")]
    fn route_stability_rejects_empty() {
        route_stability(&[]);
    }

    #[test]
    fn effective_distance_rate_cases() {
        assert_eq!(effective_distance_rate(0.0, 221.56), 0.0);
        assert_eq!(effective_distance_rate(221.56, 221.56), 1.0);
        assert_eq!(effective_distance_rate(300.0, 221.56), 1.0);
        assert!((effective_distance_rate(110.78, 221.56) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn available_buffer_cases() {
        assert_eq!(available_buffer(0, 20), 1.0);
        assert_eq!(available_buffer(20, 20), 0.0);
        assert_eq!(available_buffer(5, 20), 0.75);
    }

    #[test]
    #[should_panic(expected = "exceeds capacity")]
    fn available_buffer_rejects_overflow() {
        available_buffer(21, 20);
    }

    #[test]
    fn relay_contention_pinned_values() {
        let w = ContentionWeights::default();
        let best = relay_contention(ELS_CAP, 1.0, 1.0, &w, 0.0);
        assert!(best.stability > 0.999999);
        assert!((best.weight - 1.0).abs() < 1e-6);
        assert!(best.defer < 1e-6);

        let worst = relay_contention(0.0, 0.0, 0.0, &w, 0.0);
        assert_eq!(worst.stability, 0.0);
        assert_eq!(worst.weight, 0.0);
        assert!((worst.defer - w.relay_window).abs() < 1e-12);

        let mid = relay_contention(w.stability_scale, 0.8, 0.75, &w, 0.0);
        assert!((mid.stability - 0.63212).abs() < 1e-5, "S_e = {}", mid.stability);
        assert!((mid.weight - 0.70606).abs() < 1e-5, "W = {}", mid.weight);
        assert!(
            (mid.defer - 0.29394 * w.relay_window).abs() < 1e-5 * w.relay_window,
            "defer = {}",
            mid.defer
        );
    }

    #[test]
    fn relay_contention_jitter_bounded_and_monotone() {
        let w = ContentionWeights::default();
        let base = relay_contention(20.0, 0.5, 0.5, &w, 0.0);
        let dithered = relay_contention(20.0, 0.5, 0.5, &w, 0.999);
        assert!(dithered.defer > base.defer);
        assert!(dithered.defer - base.defer <= w.relay_window / 100.0);

        // weight monotone in each favorable input
        let mut prev = -1.0;
        for k in 0..=20 {
            let els = 3.0 * k as f64;
            let c = relay_contention(els, 0.4, 0.6, &w, 0.0);
            assert!(c.weight >= prev);
            prev = c.weight;
        }
        let mut prev = -1.0;
        for k in 0..=20 {
            let edr = k as f64 / 20.0;
            let c = relay_contention(15.0, edr, 0.6, &w, 0.0);
            assert!(c.weight >= prev);
            prev = c.weight;
        }
        let mut prev = -1.0;
        for k in 0..=20 {
            let abq = k as f64 / 20.0;
            let c = relay_contention(15.0, 0.4, abq, &w, 0.0);
            assert!(c.weight >= prev);
            prev = c.weight;
        }
    }

    #[test]
    fn critical_time_cases() {
        assert_eq!(critical_time(20.0, 0.5), Some(19.5));
        assert_eq!(critical_time(0.3, 0.5), Some(0.0));
        assert_eq!(critical_time(ELS_CAP, 0.5), None);
    }

    #[test]
    fn weights_check_catches_violations() {
        assert!(ContentionWeights::default().check().is_ok());
        let bad_sum = ContentionWeights { alpha: 0.5, beta: 0.4, gamma: 0.2, ..Default::default() };
        assert!(bad_sum.check().unwrap_err().contains("alpha+beta+gamma"));
        let bad_mu = ContentionWeights { mu: 1.5, ..Default::default() };
        assert!(bad_mu.check().unwrap_err().contains("mu"));
        let bad_window = ContentionWeights { relay_window: 0.0, ..Default::default() };
        assert!(bad_window.check().is_err());
    }

    #[test]
    fn heading_helpers() {
        assert!((normalize_heading(-PI / 2.0) - 1.5 * PI).abs() < 1e-12);
        assert_eq!(normalize_heading(2.0 * PI), 0.0);
        assert!((heading_difference(0.1, 2.0 * PI - 0.1) - 0.2).abs() < 1e-12);
        assert!((heading_difference(0.0, PI) - PI).abs() < 1e-12);
    }
}
