import numpy as np
import pytest

from asaf import (
    AsyncModel,
    DelayProfile,
    NetworkConfig,
    build_guard,
    build_offset_dl,
    evaluate,
    mutual_info,
    sample_fade_block,
    sample_fades,
)
from asaf.errors import NonFinite, ValidationError
from asaf.kernels import (
    HAVE_NUMBA,
    active_backend,
    compile_matrix,
    eval_batch,
    mi_batch,
    outage_count,
)


def _guard_setup():
    cfg = NetworkConfig(2, 4, 4, guard_len=1,
                        model=AsyncModel.PROPAGATION_DELAY)
    dp = DelayProfile.propagation((1, 0), (0, 0))
    m = build_guard(cfg, dp)
    return cfg, m, compile_matrix(m, cfg.n_relays)


class TestBackendSelection:
    def test_auto_prefers_numba(self, monkeypatch):
        monkeypatch.delenv("ASAF_BACKEND", raising=False)
        assert active_backend() == ("numba" if HAVE_NUMBA else "numpy")

    def test_explicit_choice(self, monkeypatch):
        monkeypatch.setenv("ASAF_BACKEND", "numpy")
        assert active_backend() == "numpy"
        if HAVE_NUMBA:
            monkeypatch.setenv("ASAF_BACKEND", "numba")
            assert active_backend() == "numba"

    def test_unknown_choice_rejected(self, monkeypatch):
        monkeypatch.setenv("ASAF_BACKEND", "fortran")
        with pytest.raises(ValidationError):
            active_backend()


class TestCompile:
    def test_flattening_roundtrip(self):
        cfg, m, cm = _guard_setup()
        assert cm.rows == m.rows and cm.cols == m.cols
        n_monos = sum(len(e.monomials) for e in m.entries.values())
        assert len(cm.mono_row) == len(cm.mono_col) == n_monos
        assert len(cm.mono_ptr) == n_monos + 1
        assert cm.mono_ptr[-1] == len(cm.factor_idx)
        # every referenced coefficient index is in range
        assert cm.factor_idx.min() >= 0
        assert cm.factor_idx.max() < 1 + 2 * cfg.n_relays + cfg.n_relays ** 2

    def test_eval_batch_matches_reference(self, monkeypatch):
        # backends differ from the scalar path at the ulp level only,
        # and each backend reproduces itself exactly
        cfg, m, cm = _guard_setup()
        fades = sample_fade_block(cfg, 21, 0, 64)
        ref = np.stack([evaluate(m, sample_fades(cfg, 21, t)) for t in range(64)])
        for backend in ("numpy", "numba") if HAVE_NUMBA else ("numpy",):
            monkeypatch.setenv("ASAF_BACKEND", backend)
            out = eval_batch(cm, fades)
            assert np.allclose(out, ref, atol=1e-12)
            assert np.array_equal(out, eval_batch(cm, fades))

    def test_mi_batch_matches_reference(self, monkeypatch):
        cfg, m, cm = _guard_setup()
        fades = sample_fade_block(cfg, 22, 0, 64)
        ref = np.array([mutual_info(evaluate(m, sample_fades(cfg, 22, t)), 50.0)
                        for t in range(64)])
        for backend in ("numpy", "numba") if HAVE_NUMBA else ("numpy",):
            monkeypatch.setenv("ASAF_BACKEND", backend)
            assert np.allclose(mi_batch(cm, fades, 50.0), ref, atol=1e-9)

    def test_direct_link_build_compiles(self):
        cfg = NetworkConfig(2, 2, 3, direct_link=True, relay_isolated=True,
                            model=AsyncModel.SLOT_OFFSET)
        m = build_offset_dl(cfg, DelayProfile.offset((1, 0)))
        cm = compile_matrix(m, cfg.n_relays)
        fades = sample_fade_block(cfg, 23, 0, 16)
        ref = np.stack([evaluate(m, sample_fades(cfg, 23, t)) for t in range(16)])
        assert np.allclose(eval_batch(cm, fades), ref, atol=1e-12)

    def test_overflow_is_reported(self, monkeypatch):
        monkeypatch.setenv("ASAF_BACKEND", "numpy")
        cfg, m, cm = _guard_setup()
        fades = sample_fade_block(cfg, 24, 0, 8)
        fades[3] *= 1e200
        with pytest.raises(NonFinite):
            mi_batch(cm, fades, 10.0)


class TestOutageCount:
    def test_matches_mi_batch(self):
        cfg, m, cm = _guard_setup()
        fades = sample_fade_block(cfg, 25, 0, 2000)
        rho, thr = 10.0 ** 1.4, 9.5
        want = int(np.sum(mi_batch(cm, fades, rho) < thr))
        assert 0 < want < 2000
        assert outage_count(cm, fades, rho, thr) == want

    def test_worker_count_is_immaterial(self):
        cfg, m, cm = _guard_setup()
        fades = sample_fade_block(cfg, 26, 0, 5000)
        rho, thr = 10.0 ** 1.4, 9.5
        counts = {outage_count(cm, fades, rho, thr, workers=w) for w in (1, 2, 8)}
        assert len(counts) == 1

    @pytest.mark.skipif(not HAVE_NUMBA, reason="needs the numba backend")
    def test_backends_agree(self, monkeypatch):
        # floating point in the two backends differs at the ulp level
        # (fused multiply-add), but thresholded counts come out equal on
        # this block: nothing sits within 1e-12 bits of the cut
        cfg, m, cm = _guard_setup()
        fades = sample_fade_block(cfg, 27, 0, 20000)
        rho, thr = 10.0 ** 2.1, 14.0
        monkeypatch.setenv("ASAF_BACKEND", "numpy")
        a = outage_count(cm, fades, rho, thr)
        monkeypatch.setenv("ASAF_BACKEND", "numba")
        b = outage_count(cm, fades, rho, thr)
        assert a == b > 0
