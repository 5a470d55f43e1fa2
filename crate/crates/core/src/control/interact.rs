use crate::planner::Verb;
use crate::world::{Action, AffordanceMask, ObjectId};

/// Fixed action program run once the agent is in place.
///
/// `observed` is the affordance state of the target as seen in the last
/// frame. With `gated` set, an `Open` is inserted only when the target is
/// seen closed; without it the macros run unchanged. Returns `None` when
/// the verb needs a held object and none is held, or for `GotoLocation`.
pub fn interaction_program(
    verb: Verb,
    target: ObjectId,
    observed: AffordanceMask,
    held: Option<ObjectId>,
    gated: bool,
    close_after_put: bool,
) -> Option<Vec<Action>> {
    use Action::*;
    let closed = observed.contains(AffordanceMask::OPENABLE);
    let open_first = |v: &mut Vec<Action>, always: bool| {
        if (gated && closed) || (!gated && always) {
            v.push(Open(target));
        }
    };
    let mut p = Vec::new();
    match verb {
        Verb::GotoLocation => return None,
        Verb::PickUp => p.push(PickUp(target)),
        Verb::Slice => p.push(Slice(target)),
        Verb::Toggle => p.push(ToggleOn(target)),
        Verb::Put => {
            held?;
            open_first(&mut p, false);
            p.push(Put(target));
            if close_after_put && gated && closed {
                p.push(Close(target));
            }
        }
        Verb::Heat => {
            let h = held?;
            open_first(&mut p, true);
            p.extend([
                Put(target),
                Close(target),
                ToggleOn(target),
                ToggleOff(target),
                Open(target),
                PickUp(h),
                Close(target),
            ]);
        }
        Verb::Cool => {
            let h = held?;
            open_first(&mut p, true);
            p.extend([
                Put(target),
                Close(target),
                Open(target),
                PickUp(h),
                Close(target),
            ]);
        }
        Verb::Clean => {
            let h = held?;
            p.extend([Put(target), ToggleOn(target), ToggleOff(target), PickUp(h)]);
        }
    }
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::*;

    const CLOSED: AffordanceMask =
        AffordanceMask(AffordanceMask::RECEPTACLE.0 | AffordanceMask::OPENABLE.0);
    const OPEN: AffordanceMask =
        AffordanceMask(AffordanceMask::RECEPTACLE.0 | AffordanceMask::CLOSEABLE.0);

    #[test]
    fn heat_macro() {
        let p = interaction_program(Verb::Heat, 3, CLOSED, Some(9), true, false).unwrap();
        assert_eq!(
            p,
            vec![
                Open(3),
                Put(3),
                Close(3),
                ToggleOn(3),
                ToggleOff(3),
                Open(3),
                PickUp(9),
                Close(3)
            ]
        );
        let p = interaction_program(Verb::Heat, 3, OPEN, Some(9), true, false).unwrap();
        assert_eq!(p[0], Put(3));
    }

    #[test]
    fn put_opens_only_when_seen_closed() {
        assert_eq!(
            interaction_program(Verb::Put, 2, CLOSED, Some(1), true, false).unwrap(),
            vec![Open(2), Put(2)]
        );
        assert_eq!(
            interaction_program(Verb::Put, 2, CLOSED, Some(1), true, true).unwrap(),
            vec![Open(2), Put(2), Close(2)]
        );
        assert_eq!(
            interaction_program(Verb::Put, 2, CLOSED, Some(1), false, false).unwrap(),
            vec![Put(2)]
        );
        assert!(interaction_program(Verb::Put, 2, CLOSED, None, true, false).is_none());
    }

    #[test]
    fn clean_and_cool_macros() {
        assert_eq!(
            interaction_program(
                Verb::Clean,
                4,
                AffordanceMask::RECEPTACLE,
                Some(7),
                true,
                false
            )
            .unwrap(),
            vec![Put(4), ToggleOn(4), ToggleOff(4), PickUp(7)]
        );
        assert_eq!(
            interaction_program(Verb::Cool, 4, CLOSED, Some(7), false, false).unwrap(),
            vec![Open(4), Put(4), Close(4), Open(4), PickUp(7), Close(4)]
        );
    }
}
