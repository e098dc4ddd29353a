"""Six-phase mission state machine with guarded transitions.

Phase order: pre-collection -> collection -> post-collection ->
pre-utilization -> utilization -> post-utilization. Autonomous moves happen in
the pre-* phases, teleoperation in collection/utilization; an abort from any
phase latches the machine into a terminal failed state.
"""

from __future__ import annotations

from enum import Enum


class MissionPhase(Enum):
    PRE_COLLECTION = "pre_collection"
    COLLECTION = "collection"
    POST_COLLECTION = "post_collection"
    PRE_UTILIZATION = "pre_utilization"
    UTILIZATION = "utilization"
    POST_UTILIZATION = "post_utilization"


# events
PLAN_DONE = "plan_done"
ENGAGED = "engaged"
GRASP_OK = "grasp_ok"
RETRACT_DONE = "retract_done"
PLAN2_DONE = "plan2_done"
INSERT_OK = "insert_ok"
RELEASE_OK = "release_ok"
ABORT = "abort"

EVENTS = (PLAN_DONE, ENGAGED, GRASP_OK, RETRACT_DONE, PLAN2_DONE,
          INSERT_OK, RELEASE_OK, ABORT)


class IllegalTransition(Exception):
    pass


class PhaseMachine:
    """Tracks the mission phase plus the guard flags that gate each move.

    Entering collection requires the approach plan to have executed and the
    operator to be engaged; likewise utilization for the second plan. abort
    latches a failed terminal state from anywhere.
    """

    def __init__(self):
        self.phase = MissionPhase.PRE_COLLECTION
        self.failed = False
        self.mission_complete = False
        self._plan_executed = False
        self._plan2_executed = False
        self.history = [(None, self.phase)]

    def can_run_autonomous(self) -> bool:
        return not self.failed and self.phase in (MissionPhase.PRE_COLLECTION,
                                                  MissionPhase.POST_COLLECTION,
                                                  MissionPhase.PRE_UTILIZATION)

    def transition(self, event: str) -> MissionPhase:
        if event not in EVENTS:
            raise IllegalTransition(f"unknown event {event!r}")
        if self.failed:
            raise IllegalTransition(f"{event} after terminal failure")
        if event == ABORT:
            self.failed = True
            self.history.append((event, self.phase))
            return self.phase

        p = self.phase
        if p is MissionPhase.PRE_COLLECTION:
            if event == PLAN_DONE:
                self._plan_executed = True
            elif event == ENGAGED and self._plan_executed:
                self.phase = MissionPhase.COLLECTION
            else:
                raise IllegalTransition(f"{event} in {p.value}")
        elif p is MissionPhase.COLLECTION:
            if event == GRASP_OK:
                self.phase = MissionPhase.POST_COLLECTION
            else:
                raise IllegalTransition(f"{event} in {p.value}")
        elif p is MissionPhase.POST_COLLECTION:
            if event == RETRACT_DONE:
                self.phase = MissionPhase.PRE_UTILIZATION
            else:
                raise IllegalTransition(f"{event} in {p.value}")
        elif p is MissionPhase.PRE_UTILIZATION:
            if event == PLAN2_DONE:
                self._plan2_executed = True
            elif event == ENGAGED and self._plan2_executed:
                self.phase = MissionPhase.UTILIZATION
            else:
                raise IllegalTransition(f"{event} in {p.value}")
        elif p is MissionPhase.UTILIZATION:
            if event == INSERT_OK:
                self.phase = MissionPhase.POST_UTILIZATION
            else:
                raise IllegalTransition(f"{event} in {p.value}")
        elif p is MissionPhase.POST_UTILIZATION:
            if event == RELEASE_OK:
                self.mission_complete = True
            else:
                raise IllegalTransition(f"{event} in {p.value}")
        self.history.append((event, self.phase))
        return self.phase
