mod common;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use obd_core::dsl::{parse_domain, RequirementKind};
use obd_core::reqauto::{build_automaton, RequirementAutomaton, Snapshot, Status, Step};

use common::{table_next, table_satisfied};

const CASES: u32 = 10_000;

/// Required condition `x`, activation `y`, cancellation `z`.
fn clauses(kind: RequirementKind, d: u32, p: u32, reward: &str) -> String {
    use RequirementKind::*;
    match kind {
        UA => format!("achieve x {reward}"),
        UM => format!("maintain x {reward}"),
        CA => format!("achieve x if y unless z {reward}"),
        CM => format!("maintain x if y unless z {reward}"),
        DEA => format!("achieve x after {d} if y unless z {reward}"),
        DFA => format!("achieve x within {d} if y unless z {reward}"),
        DEM => format!("maintain x after {d} if y unless z {reward}"),
        DFM => format!("maintain x within {d} if y unless z {reward}"),
        PM => format!("maintain x for {p} if y unless z {reward}"),
        PDEM => format!("maintain x for {p} after {d} if y unless z {reward}"),
        PDFM => format!("maintain x for {p} within {d} if y unless z {reward}"),
        RPM => format!("maintain x for {p} if y unless z {}", reward.replace("reward", "reward_once")),
        RPDEM => format!("maintain x for {p} after {d} if y unless z {}", reward.replace("reward", "reward_once")),
        RPDFM => format!("maintain x for {p} within {d} if y unless z {}", reward.replace("reward", "reward_once")),
    }
}

fn automaton(kind: RequirementKind, d: u32, p: u32, reward: u64) -> RequirementAutomaton {
    let text = format!("ReqID m {} Init {{ x, y, z }}", clauses(kind, d, p, &format!("reward {reward}")));
    let model = parse_domain(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
    let auto = build_automaton(&model.requirements[0]);
    assert_eq!(auto.requirement.kind, kind);
    auto
}

/// Base vector for truth values of x, y, z (value 0 is `tt`).
fn base(x: bool, y: bool, z: bool) -> [usize; 3] {
    [usize::from(!x), usize::from(!y), usize::from(!z)]
}

type Case = (u32, u32, usize, [bool; 3], [bool; 3]);

fn cases() -> impl Strategy<Value = Case> {
    (1u32..=4, 1u32..=4, 0usize..64, any::<[bool; 3]>(), any::<[bool; 3]>())
}

fn run_per_kind(check: impl Fn(RequirementKind, Case) -> Result<(), TestCaseError>) {
    for kind in RequirementKind::ALL {
        let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
        runner.run(&cases(), |c| check(kind, c)).unwrap_or_else(|e| panic!("{kind}: {e}"));
    }
}

#[test]
fn updates_follow_the_rule_tables() {
    run_per_kind(|kind, (d, p, pick, [x, y, z], _)| {
        let auto = automaton(kind, d, p, 1);
        let status = auto.statuses[pick % auto.len()];
        let b = base(x, y, z);
        let uncond = kind.is_unconditional();
        let (a, zz) = (uncond || y, !uncond && z);
        prop_assert_eq!(auto.update_action(status, &b).unwrap(), table_next(kind, d, p, status, x, a, zz, true));
        prop_assert_eq!(auto.update_event(status, &b).unwrap(), table_next(kind, d, p, status, x, a, zz, false));
        Ok(())
    });
}

#[test]
fn rewards_follow_the_rule_tables() {
    run_per_kind(|kind, (d, p, pick, [x0, y0, z0], [x1, y1, z1])| {
        let reward = 7;
        let auto = automaton(kind, d, p, reward);
        let before = auto.statuses[pick % auto.len()];
        let (b0, b1) = (base(x0, y0, z0), base(x1, y1, z1));
        let after = auto.next(before, &b1, Step::Action);
        let got = auto.reward(Snapshot { base: &b0, status: before }, Snapshot { base: &b1, status: after });
        let z1 = !kind.is_unconditional() && z1;
        let expected = if table_satisfied(kind, before, after, x0, x1, z1) { reward } else { 0 };
        prop_assert_eq!(got, expected);
        Ok(())
    });
}

#[test]
fn action_and_event_updates_differ_only_on_counter_rows() {
    run_per_kind(|kind, (d, p, pick, [x, y, z], _)| {
        let auto = automaton(kind, d, p, 1);
        let status = auto.statuses[pick % auto.len()];
        let b = base(x, y, z);
        let on_action = auto.update_action(status, &b).unwrap();
        let on_event = auto.update_event(status, &b).unwrap();
        if on_action != on_event {
            // the event step holds the counter, the action step decrements it
            prop_assert_eq!(on_event, status);
            let decremented = match status {
                Status::Deadline(1) => Status::Inactive,
                Status::Deadline(k) => Status::Deadline(k - 1),
                Status::Duration(k) => Status::Duration(k - 1),
                other => return Err(TestCaseError::fail(format!("{other} has no counter"))),
            };
            prop_assert_eq!(on_action, decremented);
        }
        Ok(())
    });
}

#[test]
fn updates_stay_within_the_status_domain_and_cycle() {
    run_per_kind(|kind, (d, p, pick, [x, y, z], _)| {
        let auto = automaton(kind, d, p, 1);
        let b = base(x, y, z);
        let mut seen = vec![auto.statuses[pick % auto.len()]];
        for _ in 0..auto.len() {
            let next = auto.update_action(*seen.last().unwrap(), &b).unwrap();
            prop_assert!(auto.index_of(next).is_some());
            seen.push(next);
        }
        // a deterministic map on a finite set revisits a status within |statuses| steps
        let first_repeat = (1..seen.len()).find(|&i| seen[..i].contains(&seen[i]));
        prop_assert!(first_repeat.is_some());
        Ok(())
    });
}

#[test]
fn rewards_scale_linearly_and_vanish_when_inactive() {
    run_per_kind(|kind, (d, p, pick, [x0, y0, z0], [x1, y1, z1])| {
        let one = automaton(kind, d, p, 3);
        let scaled = automaton(kind, d, p, 12);
        let before = one.statuses[pick % one.len()];
        let (b0, b1) = (base(x0, y0, z0), base(x1, y1, z1));
        let after = one.next(before, &b1, Step::Action);
        let snap = |b, s| Snapshot { base: b, status: s };
        let r1 = one.reward(snap(&b0, before), snap(&b1, after));
        let r4 = scaled.reward(snap(&b0, before), snap(&b1, after));
        prop_assert_eq!(r4, 4 * r1);
        if before == Status::Inactive {
            prop_assert_eq!(r1, 0);
        }
        Ok(())
    });
}

#[test]
fn unknown_status_is_rejected() {
    let auto = automaton(RequirementKind::CA, 1, 1, 1);
    assert!(auto.update_action(Status::Deadline(2), &base(true, true, true)).is_err());
    assert!(auto.update_event(Status::Stateless, &base(true, true, true)).is_err());
}

#[test]
fn status_domains_per_kind() {
    let labels = |kind, d, p| automaton(kind, d, p, 1).statuses.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
    use RequirementKind::*;
    assert_eq!(labels(UA, 1, 1), "-");
    assert_eq!(labels(CA, 1, 1), "I R");
    assert_eq!(labels(DFA, 4, 1), "I A(4) A(3) A(2) A(1)");
    assert_eq!(labels(PM, 1, 3), "I A R(3) R(2) R(1)");
    assert_eq!(labels(PDEM, 2, 2), "I A(2) A(1) R(2) R(1)");
    for kind in RequirementKind::ALL {
        let auto = automaton(kind, 3, 2, 1);
        assert_eq!(auto.initial, if kind.is_unconditional() { Status::Stateless } else { Status::Inactive });
        for (i, s) in auto.statuses.iter().enumerate() {
            assert_eq!(auto.index_of(*s), Some(i));
        }
    }
}

/// Rolls the automaton along a base trajectory, summing rewards per action step.
fn rollout(auto: &RequirementAutomaton, trajectory: &[[usize; 3]]) -> u64 {
    let mut status = auto.initial;
    let mut total = 0;
    for w in trajectory.windows(2) {
        let next = auto.update_action(status, &w[1]).unwrap();
        total += auto.reward(Snapshot { base: &w[0], status }, Snapshot { base: &w[1], status: next });
        status = next;
    }
    total
}

#[test]
fn held_duration_pays_per_consecutive_in_force_pair() {
    // activation, then S holds for the whole window and beyond
    let auto = automaton(RequirementKind::PM, 1, 3, 5);
    let held = base(true, true, false);
    let mut trajectory = vec![base(false, false, false), base(false, true, false)];
    trajectory.extend([held; 5]);
    // statuses: I, A, R(3), R(2), R(1), I, A; rewarded pairs R(3)->R(2) and R(2)->R(1)
    assert_eq!(rollout(&auto, &trajectory), 10);

    let strict = automaton(RequirementKind::RPM, 1, 3, 5);
    assert_eq!(rollout(&strict, &trajectory), 5);
    let mut broken = trajectory.clone();
    broken[4] = base(false, true, false);
    assert_eq!(rollout(&strict, &broken), 0);
}

#[test]
fn pm_and_ca_table_rows() {
    let auto = automaton(RequirementKind::PM, 1, 3, 1);
    let s_not_z = base(true, false, false);
    assert_eq!(auto.update_action(Status::Active, &s_not_z).unwrap(), Status::Duration(3));
    assert_eq!(auto.update_action(Status::Duration(1), &s_not_z).unwrap(), Status::Inactive);
    assert_eq!(auto.update_event(Status::Duration(2), &s_not_z).unwrap(), Status::Duration(2));
    assert_eq!(auto.update_event(Status::Duration(2), &base(true, false, true)).unwrap(), Status::Inactive);
    let ca = automaton(RequirementKind::CA, 1, 1, 1);
    assert_eq!(ca.update_event(Status::Inactive, &base(false, true, false)).unwrap(), Status::InForce);
    assert_eq!(ca.update_action(Status::Inactive, &base(false, false, false)).unwrap(), Status::Inactive);
}
