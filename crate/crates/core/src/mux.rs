//! Velocity multiplexer and the two-state collaborative FSM.
//!
//! | input                                  | mode    | next    | output    |
//! |----------------------------------------|---------|---------|-----------|
//! | human command                          | HUMAN   | HUMAN   | human     |
//! | human command                          | MACHINE | HUMAN   | human     |
//! | none, paused, trend in takeover set    | HUMAN   | MACHINE | machine   |
//! | none, not paused or trend not in set   | HUMAN   | HUMAN   | zero      |
//! | none                                   | MACHINE | MACHINE | machine   |

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cognitive::PriorityConfig;
use crate::heuristic::TrendLabel;
use crate::{Driver, VelocityCommand};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModeCause {
    Takeover,
    Reclaim,
    Init,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeAnnouncement {
    pub mode: Driver,
    pub cause: ModeCause,
    pub stamp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuxConfig {
    pub pause_timeout: f64,
    pub takeover_trends: BTreeSet<TrendLabel>,
    pub initial_mode: Driver,
    /// False in human standalone runs: the machine stream never drives.
    pub machine_enabled: bool,
}

impl MuxConfig {
    pub fn collaborative(priority: &PriorityConfig) -> Self {
        Self {
            pause_timeout: priority.pause_timeout,
            takeover_trends: priority.takeover_trends.clone(),
            initial_mode: Driver::Human,
            machine_enabled: true,
        }
    }

    pub fn human_only(priority: &PriorityConfig) -> Self {
        Self {
            machine_enabled: false,
            ..Self::collaborative(priority)
        }
    }

    pub fn machine_only(priority: &PriorityConfig) -> Self {
        Self {
            initial_mode: Driver::Machine,
            ..Self::collaborative(priority)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationState {
    pub mode: Driver,
    pub last_human_cmd_stamp: f64,
    pub takeover_count: u32,
    pub reclaim_count: u32,
}

impl ArbitrationState {
    /// Fresh state at `start`. A human-led run counts the human as having
    /// just been active; a machine-led run has never heard from one.
    pub fn new(config: &MuxConfig, start: f64) -> Self {
        Self {
            mode: config.initial_mode,
            last_human_cmd_stamp: match config.initial_mode {
                Driver::Human => start,
                Driver::Machine => f64::NEG_INFINITY,
            },
            takeover_count: 0,
            reclaim_count: 0,
        }
    }

    pub fn initial_announcement(&self, stamp: f64) -> ModeAnnouncement {
        ModeAnnouncement {
            mode: self.mode,
            cause: ModeCause::Init,
            stamp,
        }
    }
}

pub fn current_mode(state: &ArbitrationState) -> Driver {
    state.mode
}

pub fn is_paused(state: &ArbitrationState, config: &MuxConfig, now: f64) -> bool {
    now - state.last_human_cmd_stamp >= config.pause_timeout
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuxStep {
    pub state: ArbitrationState,
    pub output: VelocityCommand,
    pub announcement: Option<ModeAnnouncement>,
}

pub fn mux_step(
    state: &ArbitrationState,
    human: Option<&VelocityCommand>,
    machine: &VelocityCommand,
    trend: TrendLabel,
    config: &MuxConfig,
    now: f64,
) -> MuxStep {
    let mut next = *state;
    let mut announcement = None;
    let output = if let Some(cmd) = human {
        next.last_human_cmd_stamp = now;
        if state.mode == Driver::Machine {
            next.mode = Driver::Human;
            next.reclaim_count += 1;
            announcement = Some(ModeAnnouncement {
                mode: Driver::Human,
                cause: ModeCause::Reclaim,
                stamp: now,
            });
        }
        VelocityCommand { source: Driver::Human, ..*cmd }
    } else {
        match state.mode {
            Driver::Human => {
                let paused = is_paused(state, config, now);
                if config.machine_enabled && paused && config.takeover_trends.contains(&trend) {
                    next.mode = Driver::Machine;
                    next.takeover_count += 1;
                    announcement = Some(ModeAnnouncement {
                        mode: Driver::Machine,
                        cause: ModeCause::Takeover,
                        stamp: now,
                    });
                    VelocityCommand { source: Driver::Machine, ..*machine }
                } else {
                    VelocityCommand::zero(Driver::Human, now)
                }
            }
            Driver::Machine => VelocityCommand { source: Driver::Machine, ..*machine },
        }
    };
    MuxStep {
        state: next,
        output,
        announcement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cognitive::Group;
    use proptest::prelude::*;

    fn cfg(group: Group) -> MuxConfig {
        MuxConfig::collaborative(&PriorityConfig::for_group(group))
    }

    fn machine(now: f64) -> VelocityCommand {
        VelocityCommand::new(0.7, -0.2, Driver::Machine, now)
    }

    #[test]
    fn pause_while_worsening_takes_over() {
        let c = cfg(Group::Hcs);
        let s = ArbitrationState::new(&c, 0.0);
        assert_eq!(current_mode(&s), Driver::Human);
        let r = mux_step(&s, None, &machine(1.0), TrendLabel::Worsening, &c, 1.0);
        assert_eq!(current_mode(&r.state), Driver::Machine);
        assert_eq!(r.output, machine(1.0));
        assert_eq!(r.state.takeover_count, 1);
        assert_eq!(r.announcement.map(|a| a.cause), Some(ModeCause::Takeover));
    }

    #[test]
    fn pause_while_improving_coasts() {
        let c = cfg(Group::Lcs);
        let s = ArbitrationState::new(&c, 0.0);
        let r = mux_step(&s, None, &machine(5.0), TrendLabel::Improving, &c, 5.0);
        assert_eq!(r.state.mode, Driver::Human);
        assert!(r.output.is_zero());
        assert_eq!(r.output.source, Driver::Human);
        assert!(r.announcement.is_none());
    }

    #[test]
    fn short_silence_is_not_a_pause() {
        let c = cfg(Group::Lcs);
        let s = ArbitrationState::new(&c, 0.0);
        let r = mux_step(&s, None, &machine(0.2), TrendLabel::Worsening, &c, 0.2);
        assert_eq!(r.state.mode, Driver::Human);
        let r = mux_step(&s, None, &machine(0.4), TrendLabel::Worsening, &c, 0.4);
        assert_eq!(r.state.mode, Driver::Machine);
    }

    #[test]
    fn reclaim_and_counts() {
        let c = cfg(Group::Hcs);
        let s = ArbitrationState::new(&c, 0.0);
        let s = mux_step(&s, None, &machine(1.0), TrendLabel::Worsening, &c, 1.0).state;
        let h = VelocityCommand::new(0.3, 0.4, Driver::Human, 1.05);
        let r = mux_step(&s, Some(&h), &machine(1.05), TrendLabel::Worsening, &c, 1.05);
        assert_eq!(current_mode(&r.state), Driver::Human);
        assert_eq!(r.output, h);
        assert_eq!((r.state.takeover_count, r.state.reclaim_count), (1, 1));
        assert_eq!(r.announcement.map(|a| a.cause), Some(ModeCause::Reclaim));
    }

    #[test]
    fn standalone_modes() {
        let p = PriorityConfig::for_group(Group::Lcs);
        let m = MuxConfig::machine_only(&p);
        let mut s = ArbitrationState::new(&m, 0.0);
        for k in 0..50 {
            let now = k as f64 * 0.05;
            let r = mux_step(&s, None, &machine(now), TrendLabel::Improving, &m, now);
            assert_eq!(r.output, machine(now));
            s = r.state;
        }
        let h = MuxConfig::human_only(&p);
        let s = ArbitrationState::new(&h, 0.0);
        let r = mux_step(&s, None, &machine(9.0), TrendLabel::Worsening, &h, 9.0);
        assert_eq!(r.state.mode, Driver::Human);
        assert!(r.output.is_zero());
    }

    proptest! {
        #[test]
        fn output_source_matches_mode(
            steps in prop::collection::vec((any::<bool>(), 0usize..3, 0.0f64..0.5), 1..60),
            lcs in any::<bool>(),
        ) {
            let c = cfg(if lcs { Group::Lcs } else { Group::Hcs });
            let mut s = ArbitrationState::new(&c, 0.0);
            let mut now = 0.0;
            for (present, trend, gap) in steps {
                now += gap;
                let h = VelocityCommand::new(0.1, 0.0, Driver::Human, now);
                let r = mux_step(&s, present.then_some(&h), &machine(now), TrendLabel::ALL[trend], &c, now);
                prop_assert_eq!(r.output.source, r.state.mode);
                prop_assert!(r.state.takeover_count >= s.takeover_count);
                prop_assert!(r.state.reclaim_count >= s.reclaim_count);
                s = r.state;
            }
        }
    }
}
