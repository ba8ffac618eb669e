#![allow(dead_code)]

use core::f64::consts::FRAC_PI_4;

use meld_core::control::GainProfile;
use meld_core::meld::{Choice, Meld};
use meld_core::models::Arm3;
use meld_core::reference::{ConfigurationReference, QuinticPath};
use meld_core::schedule::SwitchSchedule;
use meld_core::sim::{run_scenario, Scenario, SimOptions, SimTrace};

pub const X_OP: [f64; 6] = [0.0, FRAC_PI_4, 0.0, 0.0, 0.0, 0.0];
pub const MELD_BITS: [&str; 5] = ["0011100", "0010011", "0100011", "1000011", "1110000"];
pub const STARTS: [f64; 6] = [0.0, 4.0, 7.0, 9.0, 13.0, 18.0];
pub const ORDER: [usize; 6] = [4, 0, 1, 2, 3, 4];
pub const POSES: [[f64; 3]; 6] =
    [[0.2, 1.0, 0.7], [0.5, 0.9, 0.7], [0.8, 0.6, 0.7], [0.6, 0.6, 1.1], [0.6, 1.2, 0.5], [0.0, FRAC_PI_4, 0.0]];

pub struct Arm {
    pub sys: Arm3,
    pub melds: Vec<Meld>,
    pub gains: GainProfile,
    pub refs: ConfigurationReference<Arm3>,
    pub schedule: SwitchSchedule,
    pub x0: Vec<f64>,
    pub degrees: Vec<usize>,
}

pub fn melds() -> Vec<Meld> {
    MELD_BITS.iter().map(|b| Meld::new(Choice::parse_bits(b).unwrap(), vec![2, 2, 2]).unwrap()).collect()
}

/// Pick-and-place run: one 1.5 s move to the next pose at every interval start.
pub fn arm(starts: &[f64], order: &[usize]) -> Arm {
    let sys = Arm3::default();
    let moves: Vec<(f64, f64, Vec<f64>)> = starts.iter().zip(POSES).map(|(s, p)| (*s, 1.5, p.to_vec())).collect();
    let path = QuinticPath::rest_to_rest(&X_OP[..3], &moves).unwrap();
    Arm {
        sys,
        melds: melds(),
        gains: GainProfile::uniform(&[15.0, 15.0], 7).unwrap(),
        refs: ConfigurationReference::new(sys, path).unwrap(),
        schedule: SwitchSchedule::new(starts.to_vec(), order.to_vec()).unwrap(),
        x0: vec![0.0, FRAC_PI_4, 0.0, 0.1, 0.1, 0.1],
        degrees: vec![2; 7],
    }
}

impl Arm {
    pub fn scenario(&self) -> Scenario<'_, Arm3> {
        Scenario {
            sys: &self.sys,
            deck_degrees: &self.degrees,
            melds: &self.melds,
            gains: &self.gains,
            refs: &self.refs,
            schedule: &self.schedule,
            x0: &self.x0,
        }
    }

    pub fn run(&self, t_end: f64) -> SimTrace {
        run_scenario(&self.scenario(), &SimOptions { t_end, ..SimOptions::default() }).unwrap()
    }
}
