"""Per-device state machine: encounter tracking and alert handling.

A device spends its life in tracking mode, appending encrypted encounter
entries to its local ledger and expiring anything older than the
retention window.  It switches to alert mode only through a one-time
activation token validated by the dispatch server, at which point the
scored ledger is uploaded for notification fan-out.  The ledger never
holds a plaintext contact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import authority
from .crypto import Envelope
from .messages import AlertLevel, AlertMessage, ScoredContact

__all__ = [
    "DeviceMode",
    "EncounterEntry",
    "ProximalContactList",
    "DeviceState",
    "YellowDispatchRequest",
    "OutOfRange",
    "InvalidKey",
    "UploadFailure",
    "interaction_strength",
]


class OutOfRange(Exception):
    """Encounter distance beyond the tracking threshold; a world bug."""


class InvalidKey(Exception):
    """Activation token rejected by the server."""


class UploadFailure(Exception):
    """Transport failed mid-upload; the device stays in tracking mode."""


class DeviceMode(Enum):
    TRACKING = "tracking"
    ALERT = "alert"


@dataclass
class EncounterEntry:
    """One contiguous close-range contact, peer identity encrypted."""

    peer_envelope: Envelope
    started_at: float
    duration: float
    mean_rssi: float
    estimated_distance: float

    @property
    def ended_at(self) -> float:
        return self.started_at + self.duration


@dataclass
class ProximalContactList:
    """Encrypted encounter ledger with a retention window (seconds)."""

    retention_window: float
    entries: list[EncounterEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class YellowDispatchRequest:
    """Second-degree fan-out request issued after receiving a red alert.

    Carries the authorising red origin tag and the requester's own scored
    peers; one hop only, a yellow alert never produces another request.
    """

    red_origin_tag: str
    contacts: list[ScoredContact]
    requested_at: float


def interaction_strength(entries: list[EncounterEntry], distance_cutoff: float) -> float:
    """Priority score for one peer: sum of duration * distance weight.

    The weight falls linearly from 1 at zero distance to 0 at the cutoff,
    so longer and closer contact always scores higher.
    """
    score = 0.0
    for entry in entries:
        weight = max(0.0, 1.0 - entry.estimated_distance / distance_cutoff)
        score += entry.duration * weight
    return score


class DeviceState:
    """One simulated handset."""

    def __init__(
        self,
        user_id: str,
        own_contact: str,
        retention_window: float,
        tracking_threshold: float = 3.0,
        yellow_enabled: bool = False,
    ) -> None:
        self.user_id = user_id
        self.own_contact = own_contact
        self.mode = DeviceMode.TRACKING
        self.ledger = ProximalContactList(retention_window=retention_window)
        self.received: list[AlertMessage] = []
        self.yellow_enabled = yellow_enabled
        self.tested_positive = False
        self.tracking_threshold = tracking_threshold

    def record_encounter(
        self,
        peer_envelope: Envelope,
        started_at: float,
        duration: float,
        mean_rssi: float,
        estimated_distance: float,
    ) -> EncounterEntry:
        """Append one encounter entry; repeated contacts stay distinct
        entries and are only merged at scoring time."""
        if estimated_distance > self.tracking_threshold:
            raise OutOfRange(
                f"estimated {estimated_distance:.2f} m beyond the "
                f"{self.tracking_threshold:.2f} m tracking threshold"
            )
        if duration < 0:
            raise ValueError("duration must be nonnegative")
        entry = EncounterEntry(
            peer_envelope=peer_envelope,
            started_at=started_at,
            duration=duration,
            mean_rssi=mean_rssi,
            estimated_distance=estimated_distance,
        )
        self.ledger.entries.append(entry)
        return entry

    def purge_expired(self, now: float) -> int:
        """Drop entries that ended before now minus the retention window.

        The boundary is inclusive: an entry ending exactly at the edge is
        retained.  Idempotent; returns how many entries were removed.
        """
        cutoff = now - self.ledger.retention_window
        kept = [e for e in self.ledger.entries if e.ended_at >= cutoff]
        removed = len(self.ledger.entries) - len(kept)
        self.ledger.entries = kept
        return removed

    def _grouped(self) -> dict[tuple[str, int], list[EncounterEntry]]:
        groups: dict[tuple[str, int], list[EncounterEntry]] = {}
        for entry in self.ledger.entries:
            key = (entry.peer_envelope.key_tag, entry.peer_envelope.ciphertext)
            groups.setdefault(key, []).append(entry)
        return groups

    def prioritized_contacts(
        self, capacity: int | None
    ) -> tuple[list[ScoredContact], list[ScoredContact]]:
        """Score distinct peers and split them at the capacity threshold.

        Returns (alert_list, waiting_list): descending score, ties broken
        by the ciphertext's decimal string so the order is deterministic.
        Together the two lists cover every distinct in-window peer once.
        """
        scored = [
            ScoredContact(
                envelope=entries[0].peer_envelope,
                score=interaction_strength(entries, self.tracking_threshold),
            )
            for entries in self._grouped().values()
        ]
        scored.sort(key=lambda sc: (-sc.score, str(sc.envelope.ciphertext)))
        if capacity is None:
            return scored, []
        return scored[:capacity], scored[capacity:]

    def activate_alert_mode(
        self,
        token: str,
        server: "authority.DispatchServer",
        now: float,
        capacity: int | None = None,
    ) -> "authority.UploadResult":
        """Switch to alert mode through a one-time activation token.

        On success the full scored ledger is uploaded for dispatch (the
        server re-applies the capacity threshold).  On rejection or
        transport failure the device state is left untouched.
        """
        if self.mode is not DeviceMode.TRACKING:
            raise ValueError("device is already in alert mode")
        self.purge_expired(now)
        scored, _ = self.prioritized_contacts(capacity=None)
        try:
            result = server.process_alert_upload(
                token=token,
                user_id=self.user_id,
                scored_contacts=scored,
                capacity=capacity,
                now=now,
            )
        except authority.RejectedUpload as exc:
            raise InvalidKey(str(exc)) from exc
        except authority.TransportError as exc:
            raise UploadFailure(str(exc)) from exc
        self.mode = DeviceMode.ALERT
        self.tested_positive = True
        return result

    def handle_notification(
        self, message: AlertMessage, now: float
    ) -> YellowDispatchRequest | None:
        """Log an incoming alert; a red alert may trigger yellow fan-out.

        The fan-out request is returned (not sent) and carries this
        device's own prioritized peers.  Yellow alerts are logged and
        never forwarded, bounding the cascade at one hop.
        """
        self.received.append(message)
        if (
            message.level is AlertLevel.RED
            and self.yellow_enabled
            and not self.tested_positive
        ):
            self.purge_expired(now)
            contacts, _ = self.prioritized_contacts(capacity=None)
            return YellowDispatchRequest(
                red_origin_tag=message.origin_tag,
                contacts=contacts,
                requested_at=now,
            )
        return None
