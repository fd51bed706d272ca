import numpy as np
import pytest

from memfill.errors import ContractViolationError, FormatError
from memfill.regions import LatentMatrix
from memfill.slot_memory import (
    MemoryState,
    cosine_similarity,
    init_memory,
    load_memory,
    read_memory,
    save_memory,
    update_memory,
)


def latents(rows, valid=None):
    rows = np.asarray(rows, dtype=np.float32)
    if valid is None:
        valid = np.ones(rows.shape[0], dtype=bool)
    return LatentMatrix(rows, np.asarray(valid, dtype=bool))


def state(slots, alpha=0.5, initialized=True):
    slots = np.asarray(slots, dtype=np.float32)
    flags = np.full(slots.shape[:2], initialized, dtype=bool)
    return MemoryState(slots, alpha, flags)


class TestInit:
    def test_deterministic(self):
        a = init_memory(2, 3, 4, 0.9, seed=42)
        b = init_memory(2, 3, 4, 0.9, seed=42)
        assert np.array_equal(a.slots, b.slots)

    def test_range_and_shape(self):
        mem = init_memory(2, 3, 4, 0.9, seed=0)
        assert mem.slots.size == 24
        assert mem.slots.min() >= -0.05 and mem.slots.max() <= 0.05
        assert not mem.initialized.any()

    def test_alpha_validated(self):
        with pytest.raises(ContractViolationError):
            init_memory(2, 3, 4, 1.5, seed=0)
        with pytest.raises(ContractViolationError):
            init_memory(2, 3, 4, -0.1, seed=0)


class TestCosine:
    def test_parallel(self):
        assert cosine_similarity([1, 0], [1, 0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)

    def test_scale_invariant(self):
        assert cosine_similarity([3, 4], [6, 8]) == pytest.approx(1.0)

    def test_hand_value(self):
        # dot = 1, norms = sqrt(2) and 1 -> 1/sqrt(2)
        assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(0.70711, abs=1e-5)

    def test_zero_vector_rule(self):
        assert cosine_similarity([0, 0], [1, 0]) == 0.0
        assert cosine_similarity([1e-13, 0], [1, 0]) == 0.0


class TestUpdate:
    def test_alpha_one_is_noop(self):
        mem = state([[[0.5, 0.5], [0.1, 0.9]]], alpha=1.0)
        out = update_memory(mem, latents([[1, 0]]), latents([[1, 1]]))
        assert np.array_equal(out.slots, mem.slots)

    def test_alpha_zero_overwrites(self):
        mem = state([[[0.5, 0.5], [0.1, 0.9]]], alpha=0.0)
        out = update_memory(mem, latents([[1.0, 1.0]]), latents([[2.0, 3.0]]))
        k = int(np.argmax([cosine_similarity(s, [1, 1]) for s in mem.slots[0]]))
        assert np.allclose(out.slots[0, k], [2.0, 3.0])

    def test_direct_ema_arithmetic(self):
        # alpha=0.9, slot [0,0] forced selection (only slot), v=[1,1] -> [0.1, 0.1]
        mem = state([[[0.0, 0.0]]], alpha=0.9)
        out = update_memory(mem, latents([[1, 0]]), latents([[1, 1]]))
        assert np.allclose(out.slots[0, 0], [0.1, 0.1], atol=1e-7)

    def test_geometric_decay_closed_form(self):
        rng = np.random.default_rng(0)
        alpha = 0.9
        mem = state(rng.normal(size=(1, 1, 4)), alpha=alpha)
        e0 = mem.slots[0, 0].astype(np.float64).copy()
        v = latents([[0.3, -0.2, 0.5, 0.1]])
        q = latents([[1.0, 1.0, 1.0, 1.0]])
        base = np.linalg.norm(e0 - v.data[0].astype(np.float64))
        for t in range(1, 21):
            mem = update_memory(mem, q, v)
            if t in (1, 5, 20):
                dist = np.linalg.norm(mem.slots[0, 0].astype(np.float64) - v.data[0])
                assert dist == pytest.approx(alpha**t * base, abs=1e-5)

    def test_invalid_rows_leave_block_untouched(self):
        mem = state(np.random.default_rng(1).normal(size=(2, 3, 2)), alpha=0.5)
        q = latents([[1, 0], [0, 0]], valid=[True, False])
        v = latents([[1, 1], [0, 0]], valid=[True, False])
        out = update_memory(mem, q, v)
        assert np.array_equal(out.slots[1], mem.slots[1])
        assert not np.array_equal(out.slots[0], mem.slots[0])

    def test_update_locality_single_slot(self):
        mem = init_memory(3, 8, 4, 0.5, seed=2)
        rng = np.random.default_rng(3)
        q = latents(rng.normal(size=(3, 4)))
        v = latents(rng.normal(size=(3, 4)))
        out = update_memory(mem, q, v)
        for i in range(3):
            changed = np.any(out.slots[i] != mem.slots[i], axis=1)
            assert changed.sum() == 1

    def test_argmax_invariant_to_slot_rescaling(self):
        rng = np.random.default_rng(4)
        slots = rng.normal(size=(1, 6, 3)).astype(np.float32)
        q = latents(rng.normal(size=(1, 3)))
        v = latents(rng.normal(size=(1, 3)))
        base = update_memory(state(slots), q, v)
        k = int(np.argmax(np.any(base.slots[0] != slots[0], axis=1)))
        scaled = slots.copy()
        scaled[0, (k + 1) % 6] *= 7.5
        out = update_memory(state(scaled), q, v)
        k2 = int(np.argmax(np.any(out.slots[0] != scaled[0], axis=1)))
        assert k2 == k

    def test_marks_initialized(self):
        mem = init_memory(1, 4, 2, 0.5, seed=5)
        out = update_memory(mem, latents([[1, 0]]), latents([[1, 1]]))
        assert out.initialized.sum() == 1

    def test_shape_mismatch(self):
        mem = init_memory(2, 3, 4, 0.5, seed=6)
        with pytest.raises(ContractViolationError):
            update_memory(mem, latents(np.zeros((2, 5))), latents(np.zeros((2, 5))))


class TestRead:
    def test_hand_softmax_aggregation(self):
        mem = state([[[1.0, 0.0], [0.0, 1.0]]])
        out = read_memory(mem, latents([[1, 0]]))
        assert np.allclose(out.scores[0], [0.7311, 0.2689], atol=1e-4)
        assert np.allclose(out.q_hat.data[0], [0.7311, 0.2689], atol=1e-4)
        assert out.best_slot[0] == 0

    def test_identical_slots_convex(self):
        u = np.array([0.3, -0.7, 0.2], dtype=np.float32)
        mem = state(np.tile(u, (1, 5, 1)))
        out = read_memory(mem, latents([[1, 2, 3]]))
        assert np.allclose(out.q_hat.data[0], u, atol=1e-6)

    def test_invalid_query_reads_block_mean(self):
        rng = np.random.default_rng(7)
        slots = rng.normal(size=(1, 6, 3)).astype(np.float32)
        mem = state(slots)
        out = read_memory(mem, latents(np.zeros((1, 3)), valid=[False]))
        assert np.allclose(out.scores[0], 1 / 6)
        assert np.allclose(out.q_hat.data[0], slots[0].mean(axis=0), atol=1e-6)

    def test_uninitialized_block_reads_block_mean(self):
        mem = init_memory(1, 8, 3, 0.5, seed=8)
        out = read_memory(mem, latents([[1.0, 0.0, 0.0]]))
        assert np.allclose(out.scores[0], 1 / 8)
        assert np.allclose(out.q_hat.data[0], mem.slots[0].mean(axis=0), atol=1e-6)

    def test_uninitialized_slots_score_zero(self):
        slots = np.zeros((1, 3, 2), dtype=np.float32)
        slots[0, 0] = [1.0, 0.0]
        slots[0, 1] = [0.0, 1.0]
        slots[0, 2] = [9.0, 9.0]
        flags = np.array([[True, True, False]])
        mem = MemoryState(slots, 0.5, flags)
        out = read_memory(mem, latents([[1, 0]]))
        assert out.scores[0, 2] == 0.0
        # softmax(1, 0) over the two initialized slots
        assert np.allclose(out.scores[0, :2], [0.7311, 0.2689], atol=1e-4)

    def test_score_rows_sum_to_one(self):
        rng = np.random.default_rng(9)
        for trial in range(20):
            mem = state(rng.normal(size=(3, 7, 4)))
            out = read_memory(mem, latents(rng.normal(size=(3, 4))))
            assert np.allclose(out.scores.sum(axis=1), 1.0, atol=1e-6)

    def test_qhat_matches_independent_weighted_sum(self):
        rng = np.random.default_rng(10)
        mem = state(rng.normal(size=(2, 5, 3)))
        out = read_memory(mem, latents(rng.normal(size=(2, 3))))
        for i in range(2):
            recomputed = np.zeros(3)
            for j in range(5):
                recomputed += float(out.scores[i, j]) * mem.slots[i, j].astype(np.float64)
            assert np.allclose(out.q_hat.data[i], recomputed, atol=1e-5)

    def test_disentanglement_bit_exact(self):
        rng = np.random.default_rng(11)
        mem = state(rng.normal(size=(4, 6, 5)))
        q = latents(rng.normal(size=(4, 5)))
        before = read_memory(mem, q)
        perturbed = mem.slots.copy()
        perturbed[[0, 1, 3]] += rng.normal(size=(3, 6, 5)).astype(np.float32)
        out = read_memory(MemoryState(perturbed, mem.alpha, mem.initialized), q)
        assert out.q_hat.data[2].tobytes() == before.q_hat.data[2].tobytes()

    def test_read_does_not_mutate(self):
        mem = init_memory(2, 4, 3, 0.5, seed=12)
        snapshot = mem.slots.tobytes()
        read_memory(mem, latents(np.random.default_rng(13).normal(size=(2, 3))))
        assert mem.slots.tobytes() == snapshot


class TestPersistence:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(14)
        mem = MemoryState(
            rng.normal(size=(3, 4, 5)).astype(np.float32),
            0.731,
            rng.integers(0, 2, size=(3, 4)).astype(bool),
        )
        path = tmp_path / "mem.mdm"
        save_memory(path, mem)
        loaded = load_memory(path)
        assert loaded.slots.tobytes() == mem.slots.tobytes()
        assert np.array_equal(loaded.initialized, mem.initialized)
        assert loaded.alpha == np.float32(0.731)

    def test_truncated(self, tmp_path):
        path = tmp_path / "mem.mdm"
        save_memory(path, init_memory(2, 2, 2, 0.5, seed=0))
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError):
            load_memory(path)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "mem.mdm"
        save_memory(path, init_memory(2, 2, 2, 0.5, seed=0))
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_memory(path)
