//! Two-layer controller: a reflex loop on the bump channel and a planning
//! loop on the trail channel. The layers share nothing, so the plant error
//! splits into a bump part and a trail part that add.

use crate::bounds::LayeredParams;
use crate::channels::LoopParams;
use crate::control::quantized::{InformationPattern, QuantizedController, Tap};
use crate::dynamics::{Channel, ControlCommand, Controller, Observation};
use crate::error::{domain, Result};

#[derive(Debug, Clone)]
pub struct LayeredController {
    /// `None` when bumps are absent (`b_bound = 0`); the layer then stays silent.
    reflex: Option<QuantizedController>,
    planning: QuantizedController,
}

impl LayeredController {
    pub fn reflex(&self) -> Option<&QuantizedController> {
        self.reflex.as_ref()
    }

    pub fn planning(&self) -> &QuantizedController {
        &self.planning
    }
}

/// Reflex loop: delay `T_l + T_i`, rate `R_l`, sees only `b`. Planning loop:
/// delay `T_h - T_a < 0`, rate `R_h`, sees only `r`.
pub fn make_layered_controller(lp: &LayeredParams, b_bound: f64, r_bound: f64) -> Result<LayeredController> {
    lp.validate()?;
    if !(b_bound >= 0.0) || !b_bound.is_finite() {
        return Err(domain(format!("bump bound must be non-negative, got {b_bound}")));
    }
    let reflex = if b_bound > 0.0 {
        let p = LoopParams::new(lp.reflex.signaling_delay, lp.reflex.internal_delay, 0, lp.reflex.rate)?;
        Some(QuantizedController::new(p, b_bound, InformationPattern::Feedforward, Tap::Bump)?)
    } else {
        None
    };
    let p = LoopParams::new(lp.planning.signaling_delay, 0, lp.planning.warning, lp.planning.rate)?;
    let planning = QuantizedController::new(p, r_bound, InformationPattern::Feedforward, Tap::Trail)?;
    Ok(LayeredController { reflex, planning })
}

impl Controller for LayeredController {
    fn step(&mut self, obs: &Observation<'_>) -> Result<ControlCommand> {
        let low = match &mut self.reflex {
            Some(c) => c.step(obs)?.u,
            None => 0.0,
        };
        let high = self.planning.step(obs)?.u;
        Ok(ControlCommand::new(low, high))
    }

    fn edge_disturbances(&self, channel: Channel, bound: f64) -> Vec<f64> {
        match channel {
            Channel::Bump => self.reflex.as_ref().map_or_else(Vec::new, |c| c.edge_disturbances(channel, bound)),
            Channel::Trail => self.planning.edge_disturbances(channel, bound),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::layered_bound;
    use crate::dynamics::{run_closed_loop, Schedule, SimConfig};
    use rand::{Rng, SeedableRng};

    fn params(eps: f64) -> LayeredParams {
        let reflex = LoopParams::new(1, 10, 0, 1.0).unwrap();
        let planning = LoopParams::new(0, 0, 5, 5.0).unwrap();
        LayeredParams::new(reflex, planning, eps).unwrap()
    }

    fn random_parts(seed: u64, n: usize, eps: f64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b = (0..n).map(|_| eps * rng.gen_range(-1.0..=1.0)).collect();
        let r = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        (b, r)
    }

    #[test]
    fn random_runs_respect_layered_bound() {
        let lp = params(1.0);
        let bound = layered_bound(&lp).unwrap().total;
        let (b, r) = random_parts(4, 3000, 1.0);
        let mut c = make_layered_controller(&lp, 1.0, 1.0).unwrap();
        let traj = run_closed_loop(&SimConfig::new(3000), &mut Schedule::from_parts(&b, &r), &mut c).unwrap();
        assert!(traj.sup_abs_after(0) <= bound + 1e-9);
    }

    #[test]
    fn layers_only_read_their_channel() {
        let lp = params(1.0);
        let (b, r) = random_parts(8, 500, 1.0);
        let run = |b: &[f64]| {
            let mut c = make_layered_controller(&lp, 1.0, 1.0).unwrap();
            run_closed_loop(&SimConfig::new(500), &mut Schedule::from_parts(b, &r), &mut c).unwrap()
        };
        let full = run(&b);
        let quiet = run(&vec![0.0; b.len()]);
        for (a, z) in full.records.iter().zip(&quiet.records) {
            assert_eq!(a.u_high.to_bits(), z.u_high.to_bits());
        }
    }

    #[test]
    fn errors_superpose() {
        let lp = params(1.0);
        let (b, r) = random_parts(12, 800, 1.0);
        let zeros = vec![0.0; b.len()];
        let run = |b: &[f64], r: &[f64]| {
            let mut c = make_layered_controller(&lp, 1.0, 1.0).unwrap();
            run_closed_loop(&SimConfig::new(800), &mut Schedule::from_parts(b, r), &mut c).unwrap().xs_with_final()
        };
        // quantizers idle at a nonzero limit cycle, which both single runs carry
        let (xb, xr, x, x0) = (run(&b, &zeros), run(&zeros, &r), run(&b, &r), run(&zeros, &zeros));
        for i in 0..x.len() {
            assert!((x[i] - xb[i] - xr[i] + x0[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn planning_only_when_no_bumps() {
        let lp = params(0.0);
        let mut c = make_layered_controller(&lp, 0.0, 1.0).unwrap();
        assert!(c.reflex().is_none());
        let (_, r) = random_parts(2, 1000, 0.0);
        let traj = run_closed_loop(&SimConfig::new(1000), &mut Schedule::from_parts(&[], &r), &mut c).unwrap();
        assert!(traj.sup_abs_after(0) <= 1.0 / 31.0 + 1e-12);
        assert!(make_layered_controller(&lp, -1.0, 1.0).is_err());
    }
}
