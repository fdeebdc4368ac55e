from __future__ import annotations

import pytest

from proximity_sim import crypto
from proximity_sim.authority import (
    DispatchServer,
    DoctorCredential,
    KeyIssuer,
    NotCertified,
    RejectedUpload,
    UnknownOrigin,
    ValidationOutcome,
)
from proximity_sim.crypto import Envelope, encode_contact, encrypt
from proximity_sim.messages import AlertLevel, DispatchStatus, ScoredContact

DOCTOR = DoctorCredential(doctor_id="doctor-77", certified=True)
QUACK = DoctorCredential(doctor_id="quack-01", certified=False)


@pytest.fixture
def stack(test_keypair):
    issuer = KeyIssuer(secret=b"issuer-secret")
    notifications = []
    server = DispatchServer(
        keyring={test_keypair.key_tag: test_keypair},
        issuer=issuer,
        secret=b"dispatch-secret",
        notify=lambda contact, msg: notifications.append((contact, msg)),
        waitlist_ttl=14 * 86400.0,
    )
    return issuer, server, notifications


def scored(test_keypair, contact: str, score: float) -> ScoredContact:
    return ScoredContact(
        envelope=encrypt(test_keypair.public, encode_contact(contact)), score=score
    )


class TestIssuance:
    def test_certified_doctor_gets_fresh_key(self, stack):
        issuer, _, _ = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001", now=5.0)
        assert not key.consumed
        assert key.bound_user_id == "user-0001"
        assert key.issued_by == DOCTOR.doctor_id
        assert len(key.token) == 64
        int(key.token, 16)  # 64 hex digits

    def test_uncertified_rejected(self, stack):
        issuer, _, _ = stack
        with pytest.raises(NotCertified):
            issuer.issue_activation_key(QUACK, "user-0001")
        assert not issuer.registry

    def test_reissue_same_user_distinct_tokens(self, stack):
        issuer, server, _ = stack
        first = issuer.issue_activation_key(DOCTOR, "user-0001")
        second = issuer.issue_activation_key(DOCTOR, "user-0001")
        assert first.token != second.token
        assert server.validate_and_consume(first.token, "user-0001") is ValidationOutcome.ACCEPTED
        assert server.validate_and_consume(second.token, "user-0001") is ValidationOutcome.ACCEPTED


class TestValidation:
    def test_accept_marks_consumed(self, stack):
        issuer, server, _ = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        assert server.validate_and_consume(key.token, "user-0001") is ValidationOutcome.ACCEPTED
        assert key.consumed

    def test_replay_rejected(self, stack):
        issuer, server, _ = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        server.validate_and_consume(key.token, "user-0001")
        assert (
            server.validate_and_consume(key.token, "user-0001")
            is ValidationOutcome.ALREADY_CONSUMED
        )

    def test_wrong_user_rejected_without_consuming(self, stack):
        issuer, server, _ = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        assert server.validate_and_consume(key.token, "user-0002") is ValidationOutcome.WRONG_USER
        assert not key.consumed

    def test_unknown_token(self, stack):
        _, server, _ = stack
        assert server.validate_and_consume("f" * 64, "user-0001") is ValidationOutcome.UNKNOWN_KEY


class TestAlertUpload:
    def upload(self, stack, test_keypair, capacity):
        issuer, server, notifications = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        contacts = [
            scored(test_keypair, "+20001", 500.0),
            scored(test_keypair, "+20002", 400.0),
            scored(test_keypair, "+20003", 90.0),
            scored(test_keypair, "+20004", 10.0),
        ]
        result = server.process_alert_upload(
            key.token, "user-0001", contacts, capacity=capacity, now=100.0
        )
        return result, notifications

    def test_capacity_split(self, stack, test_keypair):
        result, notifications = self.upload(stack, test_keypair, capacity=2)
        assert [r.recipient_contact for r in result.sent] == ["+20001", "+20002"]
        assert [r.recipient_contact for r in result.waitlisted] == ["+20003", "+20004"]
        assert [c for c, _ in notifications] == ["+20001", "+20002"]
        assert all(m.level is AlertLevel.RED for _, m in notifications)

    def test_unlimited_capacity_sends_all(self, stack, test_keypair):
        result, notifications = self.upload(stack, test_keypair, capacity=None)
        assert len(result.sent) == 4 and not result.waitlisted
        assert len(notifications) == 4

    def test_invalid_token_decrypts_nothing(self, stack, test_keypair, monkeypatch):
        _, server, notifications = stack
        calls = []
        original = crypto.decrypt
        monkeypatch.setattr(
            "proximity_sim.authority.decrypt",
            lambda pair, env: calls.append(1) or original(pair, env),
        )
        with pytest.raises(RejectedUpload):
            server.process_alert_upload(
                "f" * 64, "user-0001", [scored(test_keypair, "+20001", 5.0)], None, 0.0
            )
        assert not calls and not notifications

    def test_decryption_implies_consumption(self, stack, test_keypair, monkeypatch):
        issuer, server, _ = stack
        calls = []
        original = crypto.decrypt
        monkeypatch.setattr(
            "proximity_sim.authority.decrypt",
            lambda pair, env: calls.append(1) or original(pair, env),
        )
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        server.process_alert_upload(
            key.token, "user-0001", [scored(test_keypair, "+20001", 5.0)], None, 0.0
        )
        assert calls and key.consumed

    def test_undecryptable_entries_skipped_and_counted(self, stack, test_keypair):
        issuer, server, _ = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        bogus_tag = ScoredContact(Envelope(ciphertext=123, key_tag="deadbeef00000000"), 50.0)
        garbage = ScoredContact(
            Envelope(ciphertext=7, key_tag=test_keypair.key_tag), 40.0
        )  # decrypts, but not to a packed contact
        good = scored(test_keypair, "+20001", 30.0)
        result = server.process_alert_upload(
            key.token, "user-0001", [bogus_tag, garbage, good], None, 0.0
        )
        assert result.decrypt_failures == 2
        assert [r.recipient_contact for r in result.sent] == ["+20001"]

    def test_duplicate_recipient_deduped(self, stack, test_keypair):
        issuer, server, _ = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        result = server.process_alert_upload(
            key.token,
            "user-0001",
            [scored(test_keypair, "+20001", 500.0), scored(test_keypair, "+20001", 500.0)],
            None,
            0.0,
        )
        assert len(result.records) == 1

    def test_anonymity_of_dispatch(self, stack, test_keypair):
        issuer, server, notifications = stack
        uploader_contact = "+10001"
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        result = server.process_alert_upload(
            key.token, "user-0001", [scored(test_keypair, "+20001", 5.0)], None, 0.0
        )
        for record in result.records:
            assert uploader_contact not in (record.recipient_contact, result.origin_tag)
        for contact, message in notifications:
            assert uploader_contact != contact
            assert uploader_contact not in message.origin_tag
            assert uploader_contact not in message.directions
            assert "user-0001" not in message.origin_tag

    def test_server_priority_reorder(self, stack, test_keypair):
        issuer, server, _ = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        shuffled = [
            scored(test_keypair, "+20003", 90.0),
            scored(test_keypair, "+20001", 500.0),
            scored(test_keypair, "+20002", 400.0),
        ]
        result = server.process_alert_upload(key.token, "user-0001", shuffled, 1, 0.0)
        assert [r.recipient_contact for r in result.sent] == ["+20001"]
        assert [r.recipient_contact for r in result.waitlisted] == ["+20002", "+20003"]

    def test_state_empty_between_transactions(self, stack, test_keypair):
        issuer, server, _ = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        server.process_alert_upload(
            key.token, "user-0001", [scored(test_keypair, "+20001", 5.0)], None, 0.0
        )
        assert server.idle_state() == {"waitlist_origins": 0, "waitlist_records": 0}


class TestWaitlist:
    def primed(self, stack, test_keypair):
        issuer, server, notifications = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        result = server.process_alert_upload(
            key.token,
            "user-0001",
            [
                scored(test_keypair, "+20001", 500.0),
                scored(test_keypair, "+20003", 90.0),
                scored(test_keypair, "+20004", 10.0),
            ],
            capacity=1,
            now=0.0,
        )
        return server, notifications, result

    def test_release_promotes_in_priority_order(self, stack, test_keypair):
        server, notifications, result = self.primed(stack, test_keypair)
        promoted = server.release_waitlist(result.origin_tag, 1, now=50.0)
        assert [r.recipient_contact for r in promoted] == ["+20003"]
        assert promoted[0].status is DispatchStatus.SENT
        assert notifications[-1][0] == "+20003"
        assert notifications[-1][1].origin_tag == result.origin_tag
        assert server.idle_state()["waitlist_records"] == 1

    def test_zero_capacity_changes_nothing(self, stack, test_keypair):
        server, notifications, result = self.primed(stack, test_keypair)
        before = len(notifications)
        assert server.release_waitlist(result.origin_tag, 0, now=50.0) == []
        assert len(notifications) == before

    def test_unknown_origin(self, stack, test_keypair):
        server, _, _ = self.primed(stack, test_keypair)
        with pytest.raises(UnknownOrigin):
            server.release_waitlist("00000099-0000000000000000", 1)

    def test_drained_waitlist_leaves_no_state(self, stack, test_keypair):
        server, _, result = self.primed(stack, test_keypair)
        server.release_waitlist(result.origin_tag, 5, now=50.0)
        assert server.idle_state() == {"waitlist_origins": 0, "waitlist_records": 0}
        with pytest.raises(UnknownOrigin):
            server.release_waitlist(result.origin_tag, 1, now=60.0)

    def test_ttl_purge(self, stack, test_keypair):
        server, _, result = self.primed(stack, test_keypair)
        assert server.purge_expired_waitlists(now=13 * 86400.0) == 0
        assert server.purge_expired_waitlists(now=15 * 86400.0) == 1
        assert server.idle_state()["waitlist_origins"] == 0


class TestYellowDispatch:
    def test_red_tag_authorises_one_yellow_hop(self, stack, test_keypair):
        issuer, server, notifications = stack
        key = issuer.issue_activation_key(DOCTOR, "user-0001")
        red = server.process_alert_upload(
            key.token, "user-0001", [scored(test_keypair, "+20001", 5.0)], None, 0.0
        )
        yellow = server.process_yellow_dispatch(
            red.origin_tag, [scored(test_keypair, "+20009", 7.0)], None, 1.0
        )
        assert [r.recipient_contact for r in yellow.sent] == ["+20009"]
        assert all(r.level is AlertLevel.YELLOW for r in yellow.records)
        assert notifications[-1][1].level is AlertLevel.YELLOW
        # a yellow tag cannot authorise a further hop
        with pytest.raises(UnknownOrigin):
            server.process_yellow_dispatch(
                yellow.origin_tag, [scored(test_keypair, "+20010", 1.0)], None, 2.0
            )

    def test_forged_tag_rejected(self, stack, test_keypair):
        _, server, _ = stack
        with pytest.raises(UnknownOrigin):
            server.process_yellow_dispatch(
                "00000001-0123456789abcdef", [scored(test_keypair, "+20001", 1.0)], None, 0.0
            )
        with pytest.raises(UnknownOrigin):
            server.process_yellow_dispatch(
                "not-even-a-tag", [scored(test_keypair, "+20001", 1.0)], None, 0.0
            )


def test_single_use_across_a_whole_session(stack, test_keypair):
    issuer, server, _ = stack
    accepted: dict[str, int] = {}
    for index in range(8):
        key = issuer.issue_activation_key(DOCTOR, f"user-{index:04d}")
        for attempt in range(3):
            outcome = server.validate_and_consume(key.token, key.bound_user_id)
            if outcome is ValidationOutcome.ACCEPTED:
                accepted[key.token] = accepted.get(key.token, 0) + 1
    assert set(accepted.values()) == {1}
