"""Smoke test of the compiled `sorption` module. Exits non-zero on failure."""

import math

import sorption


def check_isotherms():
    assert abs(sorption.langmuir(0.2, 5.0, 200.0) - 100.0) < 1e-12
    assert sorption.isotherm_table("combined", [0.0], m=0.5, k_min=1.0, b0=200.0) == [0.0]
    top = sorption.combined_isotherm(1e6, 0.5, 1.0, 200.0)
    assert abs(top - 200.0) <= 0.2, top
    a_c = sorption.critical_concentration(0.1, 0.5, 1.0)
    quad, first = sorption.relative_deviation(a_c, 0.5, 1.0)
    assert abs(first - 0.1) < 1e-12 and abs(quad - 0.1) < 0.03, (quad, first)
    k_min = sorption.kmin_from_deviation(0.1, 0.5, a_c)
    assert abs(k_min - 1.0) < 1e-9, k_min

    a = [10.0 ** (-k) for k in range(1, 6)]
    c = [3.0 * x**0.4 for x in a]
    ln_k, m = sorption.fit_loglog(a, c)
    assert abs(m - 0.4) < 1e-12 and abs(ln_k - math.log(3.0)) < 1e-12


def check_kernel_and_sampler():
    peak = sorption.forward_probability(0.0, 2.0, 0.5, 1.0, 0.01)
    assert abs(peak - 0.5 * 0.01 / (2.0 * 2.0 * math.sqrt(math.pi))) < 1e-15
    draws = sorption.sample_site_constants(0.5, 1.0, 20000, 1)
    assert min(draws) >= 1.0
    # P(K > 4) = 4^-m = 0.5 for m = 0.5.
    frac = sum(k > 4.0 for k in draws) / len(draws)
    assert abs(frac - 0.5) < 0.02, frac
    try:
        sorption.sample_site_constants(1.5, 1.0, 1, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid exponent accepted")


def check_simulation():
    config = sorption.Config(conc_a0=50.0, conc_b0=50.0, n_steps=50, seed=7)
    sim = sorption.Simulation(config)
    n_a, n_b, n_c = sim.counts()
    record = sim.step()
    assert record["step"] == 1 and sim.step_index == 1
    series = sim.run()
    assert series["step"][-1] == 50 and len(series["conc_C"]) == 50
    a, b, c = sim.counts()
    assert a + c == n_a + n_c and b + c == n_b + n_c
    assert all(0.0 <= x < 200.0 for x in sim.positions_a())

    first = sorption.run(config)
    assert first == sorption.run(config)
    assert len(first["step"]) == 51

    hetero = sorption.Config.from_toml(
        '[simulation]\nseed = 2\nconc_a0 = 20.0\nconc_b0 = 20.0\nn_steps = 20\n'
        '[simulation.sites]\nmodel = "heterogeneous"\nm = 0.5\nk_min = 1.0\n'
    )
    assert hetero.seed == 2
    rows = sorption.sweep(hetero, [5.0, 10.0], replicates=2, window=10)
    assert [r[0] for r in rows] == [5.0, 10.0] and all(r[4] == 2 for r in rows)

    try:
        sorption.Config(dt=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative dt accepted")


if __name__ == "__main__":
    check_isotherms()
    check_kernel_and_sampler()
    check_simulation()
    print("sorption smoke test passed")
