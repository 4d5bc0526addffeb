"""Grasp controller: displacement classification, arbitration, the grasp
phase machine, and the framed serial protocol to the valve MCU.

Per finger, the latest contact-center displacement D is classified into
StableGrasp / DisturbanceOccured / Regrasp / NoContact against the
thresholds T1 and T2. An arbitration step fuses the two finger flags
with the current grasp phase into valve commands: seal on dual
stability, reopen on disturbance, regrasp on slip, release when nothing
is touched for too long.
"""

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import List, Optional, Tuple

from .errors import NoDisturbanceError, StaleFlagsError

CONTROL_PERIOD_S = 0.033  # 33 plant ticks at 1 ms, ~30 Hz frame rate
DEFAULT_GRASP_MASK = 0xFF

REGRASP_RELEASE_S = 1.0  # suction phase of a regrasp
REGRASP_PAUSE_S = 0.5  # sealed pause before closing again
MAX_REGRASPS = 3

_EPS = 1e-9


@dataclass
class ControlThresholds:
    t1_mm: float = 0.5
    t2_mm: float = 5.0
    stability_window_s: float = 3.0
    no_contact_timeout_s: float = 10.0
    # Fraction of the nominal sample count that must be present inside
    # the stability window (guards against sparse tracks).
    window_coverage: float = 0.9
    # "sliding": stability judged on the trailing window as-is;
    # "restart": the window restarts after every violation.
    window_mode: str = "sliding"

    def __post_init__(self):
        if not 0 < self.t1_mm < self.t2_mm:
            raise ValueError("need 0 < T1 < T2")
        if self.stability_window_s <= 0 or self.no_contact_timeout_s <= 0:
            raise ValueError("windows must be positive")
        if self.window_mode not in ("sliding", "restart"):
            raise ValueError(f"unknown window_mode {self.window_mode!r}")


class FlagKind(Enum):
    STABLE_GRASP = "StableGrasp"
    DISTURBANCE_OCCURED = "DisturbanceOccured"
    REGRASP = "Regrasp"
    NO_CONTACT = "NoContact"


@dataclass(frozen=True)
class PerceptionFlag:
    finger_id: int
    kind: FlagKind
    timestamp: float


class Phase(Enum):
    IDLE = "idle"
    CLOSING = "closing"
    CONTACTED = "contacted"
    STABLE = "stable"
    DISTURBED = "disturbed"
    REGRASPING = "regrasping"
    RELEASED = "released"


LEGAL_TRANSITIONS = {
    Phase.IDLE: {Phase.CLOSING},
    Phase.CLOSING: {Phase.CONTACTED, Phase.RELEASED},
    Phase.CONTACTED: {Phase.STABLE, Phase.REGRASPING},
    Phase.STABLE: {Phase.DISTURBED, Phase.RELEASED},
    Phase.DISTURBED: {Phase.STABLE, Phase.REGRASPING},
    Phase.REGRASPING: {Phase.CLOSING},
    Phase.RELEASED: set(),
}


@dataclass
class GraspPhase:
    state: Phase = Phase.IDLE
    entered_at: float = 0.0


class CommandKind(IntEnum):
    CLOSE_VALVES = 0x01
    REOPEN_VALVES = 0x02
    REGRASP = 0x03
    RELEASE = 0x04


@dataclass(frozen=True)
class McuCommand:
    kind: CommandKind
    valve_mask: int = DEFAULT_GRASP_MASK
    timestamp: float = 0.0


def classify_frame(track, thresholds, now, control_period=CONTROL_PERIOD_S):
    """Classify one finger's track into a perception flag at time `now`.

    StableGrasp: every displacement in the trailing stability window is
    <= T1 (inclusive), the window is fully populated, and the track is
    fresh. DisturbanceOccured: latest D in (T1, T2]. Regrasp: latest
    D > T2. NoContact otherwise (no contact, stale contact, or a window
    not yet filled).
    """
    t1, t2 = thresholds.t1_mm, thresholds.t2_mm
    fresh_horizon = 2.0 * control_period + _EPS

    if not track.centers or (now - track.timestamps[-1]) > fresh_horizon:
        return PerceptionFlag(track.finger_id, FlagKind.NO_CONTACT, now)

    if track.displacements:
        d = track.displacements[-1]
        if d > t2:
            return PerceptionFlag(track.finger_id, FlagKind.REGRASP, now)
        if d > t1:
            return PerceptionFlag(track.finger_id, FlagKind.DISTURBANCE_OCCURED, now)

    if _window_stable(track, thresholds, now, control_period):
        return PerceptionFlag(track.finger_id, FlagKind.STABLE_GRASP, now)
    return PerceptionFlag(track.finger_id, FlagKind.NO_CONTACT, now)


def _window_stable(track, thresholds, now, control_period):
    window = thresholds.stability_window_s
    t1 = thresholds.t1_mm
    if not track.displacements:
        return False

    start = now - window - _EPS
    in_window = [(t, d) for t, d in zip(track.disp_timestamps, track.displacements)
                 if t > start]
    if any(d > t1 for _, d in in_window):
        return False

    if thresholds.window_mode == "restart":
        # The window restarts after the most recent violation anywhere in
        # the track, not just inside the trailing window.
        violations = [t for t, d in zip(track.disp_timestamps, track.displacements)
                      if d > t1]
        anchor = max([track.disp_timestamps[0]] + violations)
        if now - anchor < window - _EPS:
            return False
    else:
        if now - track.disp_timestamps[0] < window - _EPS:
            return False

    needed = int(math.ceil(thresholds.window_coverage * window / control_period))
    return len(in_window) >= needed


def arbitrate(flag1, flag2, phase, thresholds, now=None,
              control_period=CONTROL_PERIOD_S):
    """Fuse the two finger flags with the grasp phase into a command kind.

    Priority: Regrasp > DisturbanceOccured > dual StableGrasp > timeout
    Release. Returns None when nothing needs to change. Raises
    StaleFlagsError when either flag is older than two control periods.
    """
    if now is None:
        now = max(flag1.timestamp, flag2.timestamp)
    horizon = 2.0 * control_period + _EPS
    for flag in (flag1, flag2):
        if now - flag.timestamp > horizon:
            raise StaleFlagsError(
                f"finger {flag.finger_id} flag is {now - flag.timestamp:.3f}s old"
            )

    kinds = (flag1.kind, flag2.kind)
    if FlagKind.REGRASP in kinds:
        return CommandKind.REGRASP
    if FlagKind.DISTURBANCE_OCCURED in kinds:
        return CommandKind.REOPEN_VALVES
    if kinds == (FlagKind.STABLE_GRASP, FlagKind.STABLE_GRASP):
        return CommandKind.CLOSE_VALVES
    if kinds == (FlagKind.NO_CONTACT, FlagKind.NO_CONTACT) \
            and phase.state == Phase.CLOSING \
            and now - phase.entered_at >= thresholds.no_contact_timeout_s - _EPS:
        return CommandKind.RELEASE
    return None


class GraspSupervisor:
    """Runs the grasp phase machine and emits edge-triggered commands.

    Commands are produced only on phase transitions (seal idempotence: a
    sealed stable grasp stays silent). The regrasp command releases and
    pauses; re-entering Closing restarts the closing actuation. After
    max_regrasps failed attempts the supervisor emits Release and
    terminates the episode without leaving its current phase.
    """

    def __init__(self, thresholds=None, grasp_mask=DEFAULT_GRASP_MASK,
                 control_period=CONTROL_PERIOD_S, max_regrasps=MAX_REGRASPS):
        self.thresholds = thresholds or ControlThresholds()
        self.grasp_mask = grasp_mask
        self.control_period = control_period
        self.max_regrasps = max_regrasps
        self.phase = GraspPhase(Phase.IDLE, 0.0)
        self.regrasp_count = 0
        self.terminated = False
        self.transitions = []  # (time, from, to) audit trail
        self._stale_since = None
        # Set when a slip is seen while sealed: the mandatory Disturbed
        # hop must fire the regrasp on the following period even though
        # the displacement signal has already settled by then.
        self._pending_regrasp = False

    def _transition(self, new_state, now):
        old = self.phase.state
        if new_state not in LEGAL_TRANSITIONS[old]:
            raise RuntimeError(f"illegal phase transition {old} -> {new_state}")
        self.transitions.append((now, old, new_state))
        self.phase = GraspPhase(new_state, now)

    def _command(self, kind, now):
        return McuCommand(kind=kind, valve_mask=self.grasp_mask, timestamp=now)

    def start(self, now=0.0):
        """Idle -> Closing; pressurizes the grasp chambers."""
        self._transition(Phase.CLOSING, now)
        return [self._command(CommandKind.REOPEN_VALVES, now)]

    def update(self, flag1, flag2, now, fresh1=None, fresh2=None):
        """Advance the phase machine one control period.

        fresh1/fresh2: whether each finger currently has a fresh contact
        center (defaults to flag kind != NoContact). Returns the list of
        commands to put on the wire this period.
        """
        if self.terminated or self.phase.state in (Phase.IDLE, Phase.RELEASED):
            return []
        if fresh1 is None:
            fresh1 = flag1.kind != FlagKind.NO_CONTACT
        if fresh2 is None:
            fresh2 = flag2.kind != FlagKind.NO_CONTACT

        cmd = arbitrate(flag1, flag2, self.phase, self.thresholds, now,
                        self.control_period)
        self._track_staleness(fresh1, fresh2, now)
        state = self.phase.state

        if state == Phase.CLOSING:
            if cmd == CommandKind.RELEASE:
                self._transition(Phase.RELEASED, now)
                self.terminated = True
                return [self._command(CommandKind.RELEASE, now)]
            if fresh1 and fresh2:
                self._transition(Phase.CONTACTED, now)
            return []

        if state == Phase.CONTACTED:
            if cmd == CommandKind.CLOSE_VALVES:
                self._transition(Phase.STABLE, now)
                return [self._command(CommandKind.CLOSE_VALVES, now)]
            if cmd == CommandKind.REGRASP or self._stale_timed_out(now):
                return self._regrasp_or_release(now)
            return []

        if state == Phase.STABLE:
            if cmd in (CommandKind.REOPEN_VALVES, CommandKind.REGRASP):
                # A slip (Regrasp flag) routes through Disturbed first;
                # the regrasp follows on the next period.
                self._pending_regrasp = cmd == CommandKind.REGRASP
                self._transition(Phase.DISTURBED, now)
                return [self._command(CommandKind.REOPEN_VALVES, now)]
            if self._stale_timed_out(now):
                self._transition(Phase.RELEASED, now)
                self.terminated = True
                return [self._command(CommandKind.RELEASE, now)]
            return []

        if state == Phase.DISTURBED:
            if (self._pending_regrasp or cmd == CommandKind.REGRASP
                    or self._stale_timed_out(now)):
                self._pending_regrasp = False
                return self._regrasp_or_release(now)
            if cmd == CommandKind.CLOSE_VALVES:
                self._transition(Phase.STABLE, now)
                return [self._command(CommandKind.CLOSE_VALVES, now)]
            return []

        if state == Phase.REGRASPING:
            # Flags are ignored while the fingers move; once the release
            # and pause have elapsed, close again.
            if now - self.phase.entered_at >= REGRASP_RELEASE_S + REGRASP_PAUSE_S - _EPS:
                self._transition(Phase.CLOSING, now)
                return [self._command(CommandKind.REOPEN_VALVES, now)]
            return []

        return []

    def _track_staleness(self, fresh1, fresh2, now):
        if fresh1 or fresh2:
            self._stale_since = None
        elif self._stale_since is None:
            self._stale_since = now

    def _stale_timed_out(self, now):
        return (self._stale_since is not None
                and now - self._stale_since
                >= self.thresholds.no_contact_timeout_s - _EPS)

    def _regrasp_or_release(self, now):
        if self.regrasp_count >= self.max_regrasps:
            self.terminated = True
            return [self._command(CommandKind.RELEASE, now)]
        self.regrasp_count += 1
        self._transition(Phase.REGRASPING, now)
        return [self._command(CommandKind.REGRASP, now)]


# -- MCU wire protocol ------------------------------------------------------

FRAME_SYNC = 0xAA


def encode_frame(command):
    """4-byte frame: sync, command code, valve mask, XOR checksum."""
    code = int(command.kind)
    mask = command.valve_mask
    if not 0 <= mask <= 0xFF:
        raise ValueError(f"valve mask {mask} does not fit one byte")
    return bytes([FRAME_SYNC, code, mask, code ^ mask])


def decode_frame(frame):
    if len(frame) != 4:
        raise ValueError(f"frame must be 4 bytes, got {len(frame)}")
    sync, code, mask, checksum = frame
    if sync != FRAME_SYNC:
        raise ValueError(f"bad sync byte 0x{sync:02X}")
    if checksum != (code ^ mask):
        raise ValueError("checksum mismatch")
    try:
        kind = CommandKind(code)
    except ValueError:
        raise ValueError(f"unknown command code 0x{code:02X}")
    return kind, mask


def mask_chambers(mask):
    return [i for i in range(8) if (mask >> i) & 1]


class McuEmulator:
    """Executes framed commands against the plant with the control delay.

    Frames submitted at a control tick are decoded immediately but acted
    on control_delay later, mirroring the high-level-to-MCU path. The
    regrasp and release sequences are timed by plant ticks.
    """

    def __init__(self, plant):
        self.plant = plant
        self._agenda = []  # (due_tick, seq, chamber_list, valve_command)
        self._seq = 0
        self.executed = []  # (tick, CommandKind, mask) log

    def submit(self, frame):
        kind, mask = decode_frame(frame)
        cfg = self.plant.config
        due = self.plant.tick + cfg.ticks(cfg.control_delay)
        chambers = mask_chambers(mask)
        self.executed.append((due, kind, mask))

        if kind == CommandKind.CLOSE_VALVES:
            self._schedule(due, chambers, 0)
        elif kind == CommandKind.REOPEN_VALVES:
            self._schedule(due, chambers, +1)
        elif kind == CommandKind.REGRASP:
            self._schedule(due, chambers, -1)
            self._schedule(due + cfg.ticks(REGRASP_RELEASE_S), chambers, 0)
        elif kind == CommandKind.RELEASE:
            self._schedule(due, chambers, -1)
            self._schedule(due + cfg.ticks(REGRASP_RELEASE_S), chambers, 0)

    def _schedule(self, due_tick, chambers, valve_command):
        self._agenda.append((due_tick, self._seq, chambers, valve_command))
        self._seq += 1

    def on_tick(self):
        """Issue due valve commands; call once per plant tick, before step."""
        if not self._agenda:
            return
        self._agenda.sort()
        now = self.plant.tick
        while self._agenda and self._agenda[0][0] <= now:
            _, _, chambers, command = self._agenda.pop(0)
            self.plant.apply_valve_command(chambers, command)


# -- diagnostics -------------------------------------------------------------


class GuardAction(Enum):
    CONTINUE = "continue"
    STOP_AND_RETURN = "stop_and_return"


def edge_guard(track, width=640, height=480, margin=40.0):
    """Stop manipulation when the contact center nears the sensor edge."""
    if not track.centers:
        raise ValueError("edge_guard needs a nonempty track")
    x, y = track.centers[-1]
    if x < margin or y < margin or x > width - margin or y > height - margin:
        return GuardAction.STOP_AND_RETURN
    return GuardAction.CONTINUE


def measure_valve_response(trace_rows, onset_time, n_chambers=8):
    """Seconds from a disturbance onset to the first valve-state change.

    trace_rows: plant trace rows (sim_time first, valve states last per
    plant.TRACE_COLUMNS). Raises NoDisturbanceError when no valve
    changes after the onset.
    """
    if onset_time is None:
        raise NoDisturbanceError("no disturbance onset in the episode")
    prev = None
    for row in trace_rows:
        t = row[0]
        valves = tuple(int(v) for v in row[-n_chambers:])
        if prev is not None and t > onset_time and valves != prev:
            return t - onset_time
        prev = valves
    raise NoDisturbanceError(
        f"no valve actuation after onset at t={onset_time:.3f}s"
    )
