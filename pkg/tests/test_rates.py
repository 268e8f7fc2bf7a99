import numpy as np
import pytest

from cm4d import channel as ch
from cm4d import demapper as dm
from cm4d import geometry as g
from cm4d import rates as rt


def pm_qpsk():
    return g.LabeledConstellation(
        g.normalize_energy(g.product_constellation([g.pam_points(2)] * 4, "pm-qpsk")),
        g.product_labeling([g.brgc(1)] * 4),
    )


def pm_16qam(lab=None):
    c = g.normalize_energy(g.product_constellation([g.pam_points(4)] * 4, "pm-16qam"))
    return g.LabeledConstellation(c, g.product_labeling([lab or g.brgc(2)] * 4))


def test_capacity_examples():
    assert rt.capacity_awgn4(0.0) == 0.0
    assert rt.capacity_awgn4(2.0) == pytest.approx(2.0, rel=1e-15)
    assert rt.capacity_awgn4(6.0) == pytest.approx(4.0, rel=1e-15)
    with pytest.raises(ValueError):
        rt.capacity_awgn4(-0.1)


def test_mi_saturates_at_high_snr():
    lc = pm_qpsk()
    est = rt.mi_mc(lc.constellation, ch.snr_point(40.0, 4.0), 50_000, seed=1)
    assert est.value == pytest.approx(4.0, abs=1e-3)


def test_mi_vanishes_at_low_snr():
    lc = pm_qpsk()
    est = rt.mi_mc(lc.constellation, ch.snr_point(-40.0, 4.0), 50_000, seed=1)
    assert abs(est.value) < 1e-3


def test_gmi_saturates_for_any_bijective_labeling():
    lc = pm_16qam(g.nbc(2))
    est = rt.gmi_mc(lc, ch.snr_point(40.0, 8.0), 20_000, seed=2)
    assert est.value == pytest.approx(8.0, abs=1e-3)


def test_pm_qpsk_gmi_equals_mi_with_shared_streams():
    lc = pm_qpsk()
    for gdb in (-2.0, 1.0, 4.0, 7.0):
        snr = ch.snr_point(gdb, 4.0)
        mi = rt.mi_mc(lc.constellation, snr, 50_000, seed=3)
        gmi = rt.gmi_mc(lc, snr, 50_000, seed=3)
        assert gmi.value == pytest.approx(mi.value, abs=1e-12)


def test_gmi_not_above_mi():
    lc = pm_16qam(g.nbc(2))
    for gdb in (0.0, 6.0, 12.0):
        snr = ch.snr_point(gdb, 8.0)
        mi = rt.mi_mc(lc.constellation, snr, 100_000, seed=4)
        gmi = rt.gmi_mc(lc, snr, 100_000, seed=4)
        se = np.hypot(mi.std_error, gmi.std_error)
        assert gmi.value <= mi.value + 3 * se


def test_mi_ignores_labeling():
    # the MI path never touches a labeling: same constellation and seed
    # give the identical estimate regardless of how points are labeled
    a = pm_16qam(g.brgc(2)).constellation
    b = pm_16qam(g.agc2()).constellation
    snr = ch.snr_point(8.0, 8.0)
    assert rt.mi_mc(a, snr, 20_000, seed=5).value == rt.mi_mc(b, snr, 20_000, seed=5).value


def test_product_fast_path_matches_generic():
    lc = pm_16qam()
    generic_c = g.Constellation("no-factors", lc.constellation.points)
    generic_lc = g.LabeledConstellation(generic_c, lc.labeling)
    snr = ch.snr_point(10.0, 8.0)
    fast_mi = rt.mi_mc(lc.constellation, snr, 30_000, seed=6)
    gen_mi = rt.mi_mc(generic_c, snr, 30_000, seed=6)
    assert fast_mi.value == pytest.approx(gen_mi.value, abs=1e-9)
    fast_gmi = rt.gmi_mc(lc, snr, 30_000, seed=6)
    gen_gmi = rt.gmi_mc(generic_lc, snr, 30_000, seed=6)
    assert fast_gmi.value == pytest.approx(gen_gmi.value, abs=1e-9)


def test_gh_matches_mc_for_pm_16qam():
    lc = pm_16qam()
    snr = ch.snr_point(10.0, 8.0)
    mc = rt.mi_mc(lc.constellation, snr, 400_000, seed=7)
    gh = rt.mi_gh_product(lc.constellation, snr, nodes=20)
    assert abs(mc.value - gh.value) < 3 * mc.std_error
    mcg = rt.gmi_mc(lc, snr, 400_000, seed=7)
    ghg = rt.gmi_gh_product(lc, snr, nodes=20)
    assert abs(mcg.value - ghg.value) < 3 * mcg.std_error


def test_gh_pm_qpsk_equals_four_bpsk_dimensions():
    # product MI is the sum of the per-dimension 1D values; with four
    # identical BPSK factors each contributes exactly a quarter
    lc = pm_qpsk()
    snr = ch.snr_point(0.0, 4.0)
    full = rt.mi_gh_product(lc.constellation, snr, nodes=32)
    one_dim = g.product_constellation(
        [np.array([-0.5, 0.5])] + [np.array([0.0])] * 3, "bpsk-1d"
    )
    # same noise density, a quarter of the energy: per-dimension SNR is gamma/4
    snr_1d = ch.SnrPoint(
        es=one_dim.es, n0=snr.n0, gamma=one_dim.es / snr.n0, eta=1.0, ebn0=one_dim.es / snr.n0
    )
    one = rt.mi_gh_product(one_dim, snr_1d, nodes=32)
    assert full.value == pytest.approx(4 * one.value, rel=1e-12)


def test_gh_quadrature_convergence():
    # 20-node quadrature sits far below plotting resolution everywhere;
    # once the level spacing dwarfs the noise sigma the log-ratio kinks
    # fall between nodes and the residual grows to the 1e-4..1e-3 scale
    lc = pm_16qam()
    for gdb in (0.0, 4.0, 8.0, 12.0, 16.0, 20.0):
        snr = ch.snr_point(gdb, 8.0)
        a = rt.mi_gh_product(lc.constellation, snr, nodes=20)
        b = rt.mi_gh_product(lc.constellation, snr, nodes=40)
        assert abs(a.value - b.value) < 2e-3
        if gdb <= 8.0:
            assert abs(a.value - b.value) < 1e-6
        ag = rt.gmi_gh_product(lc, snr, nodes=20)
        bg = rt.gmi_gh_product(lc, snr, nodes=40)
        assert abs(ag.value - bg.value) < 2e-3


def test_gh_rejects_non_product():
    lc = g.LabeledConstellation(g.normalize_energy(g.d4_odd_shells(9)), g.nbc(8))
    snr = ch.snr_point(8.0, 8.0)
    with pytest.raises(ValueError):
        rt.mi_gh_product(lc.constellation, snr)
    with pytest.raises(ValueError):
        rt.gmi_gh_product(lc, snr)


def test_gh_node_range():
    lc = pm_qpsk()
    snr = ch.snr_point(0.0, 4.0)
    for bad in (9, 65):
        with pytest.raises(ValueError):
            rt.mi_gh_product(lc.constellation, snr, nodes=bad)


def test_labeling_ordering_brgc_nbc_agc():
    # 4-PAM per dimension at 10 dB: Gray > natural > anti-Gray, exactly
    # under quadrature and within MC uncertainty
    snr = ch.snr_point(10.0, 8.0)
    vals = {}
    for name, lab in (("brgc", g.brgc(2)), ("nbc", g.nbc(2)), ("agc", g.agc2())):
        vals[name] = rt.gmi_gh_product(pm_16qam(lab), snr).value
    assert vals["brgc"] > vals["nbc"] > vals["agc"]
    mc = {}
    for name, lab in (("brgc", g.brgc(2)), ("nbc", g.nbc(2)), ("agc", g.agc2())):
        est = rt.gmi_mc(pm_16qam(lab), snr, 200_000, seed=8)
        mc[name] = (est.value, est.std_error)
    assert mc["brgc"][0] - mc["nbc"][0] > 3 * np.hypot(mc["brgc"][1], mc["nbc"][1])
    assert mc["nbc"][0] - mc["agc"][0] > 3 * np.hypot(mc["nbc"][1], mc["agc"][1])


def test_monotone_in_snr():
    lc = pm_16qam()
    prev = None
    for gdb in np.arange(-2.0, 14.1, 1.0):
        est = rt.gmi_mc(lc, ch.snr_point(gdb, 8.0), 50_000, seed=9)
        if prev is not None:
            assert est.value >= prev.value - 3 * np.hypot(est.std_error, prev.std_error)
        prev = est


def test_per_bit_breakdown_sums_to_total():
    lc = pm_16qam()
    est = rt.gmi_mc(lc, ch.snr_point(8.0, 8.0), 50_000, seed=10)
    assert est.per_bit is not None
    assert est.per_bit.sum() == pytest.approx(est.value, rel=1e-12)


def test_gmi_from_llrs_degenerate_inputs():
    zeros = dm.LlrBlock(np.zeros((100, 3)), np.zeros((100, 3), dtype=np.uint8), dm.LlrConvention.ONE_OVER_ZERO)
    assert rt.gmi_from_llrs(zeros).value == pytest.approx(0.0)
    bits = (np.arange(300).reshape(100, 3) % 2).astype(np.uint8)
    perfect = dm.LlrBlock((2.0 * bits - 1.0) * 1e6, bits, dm.LlrConvention.ONE_OVER_ZERO)
    assert rt.gmi_from_llrs(perfect).value == pytest.approx(3.0, abs=1e-9)


def test_gmi_from_llrs_matches_gmi_mc():
    lc = pm_16qam()
    snr = ch.snr_point(8.0, 8.0)
    ns = 200_000
    block, bits = ch.draw_uniform_symbols(lc, ns, seed=11)
    y = ch.transmit(block, snr, seed=11)
    from_llrs = rt.gmi_from_llrs(dm.exact_llrs(y, lc, snr, true_bits=bits))
    direct = rt.gmi_mc(lc, snr, ns, seed=11)
    se = np.hypot(from_llrs.std_error, direct.std_error)
    assert abs(from_llrs.value - direct.value) < 3 * se
    assert not from_llrs.proxy


def test_gmi_from_llrs_flags_maxlog_proxy():
    lc = pm_16qam()
    snr = ch.snr_point(8.0, 8.0)
    block, bits = ch.draw_uniform_symbols(lc, 1000, seed=12)
    y = ch.transmit(block, snr, seed=12)
    est = rt.gmi_from_llrs(dm.maxlog_llrs(y, lc, snr, true_bits=bits))
    assert est.proxy


def test_capacity_bounds_catalog_sample():
    lc = pm_16qam()
    for gdb in (0.0, 6.0, 12.0):
        snr = ch.snr_point(gdb, 8.0)
        mi = rt.mi_mc(lc.constellation, snr, 100_000, seed=13)
        gmi = rt.gmi_mc(lc, snr, 100_000, seed=13)
        cap = rt.capacity_awgn4(snr.gamma)
        assert 0 <= gmi.value <= mi.value + 3 * np.hypot(mi.std_error, gmi.std_error)
        assert mi.value <= min(8.0, cap) + 3 * mi.std_error
