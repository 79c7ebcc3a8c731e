import json

import numpy as np
import pytest

from cfgrid.network import CASE_DIR, bundled_case, case_from_dict

# Steady coefficient table of the WSCC 9-bus system, two decimals.
# bus -> ({neighbor: c_eta}, c_xi or None for transit buses)
TABLE_I = {
    "1": ({"4": 0.99 - 0.04j}, 0.01 + 0.04j),
    "2": ({"7": 1.00 - 0.10j}, 0.00 + 0.10j),
    "3": ({"9": 1.01 - 0.05j}, -0.01 + 0.05j),
    "4": ({"1": 0.45 - 0.02j, "5": 0.29 + 0.00j, "6": 0.27 + 0.02j}, None),
    "5": ({"4": 0.69 + 0.00j, "7": 0.35 + 0.07j}, -0.04 - 0.07j),
    "6": ({"4": 0.67 + 0.01j, "9": 0.36 + 0.04j}, -0.03 - 0.05j),
    "7": ({"2": 0.45 + 0.01j, "5": 0.17 + 0.00j, "8": 0.38 - 0.01j}, None),
    "8": ({"7": 0.59 + 0.03j, "9": 0.43 + 0.01j}, -0.02 - 0.04j),
    "9": ({"3": 0.53 - 0.02j, "6": 0.17 + 0.01j, "8": 0.30 + 0.01j}, None),
}

C_CHI_78 = -(0.01 + 0.03j)


def load_doc(name):
    with open(CASE_DIR / f"{name}.json") as fh:
        return json.load(fh)


def wscc_with_regulating_transformer(k_alpha=0.0):
    """WSCC case with line 7-8 swapped for a unit-tap regulating transformer of equal impedance.

    The line charging stays in place as two shunts so the operating point is unchanged.
    """
    doc = load_doc("wscc9")
    branches = []
    for br in doc["branches"]:
        if br["id"] != "L7-8":
            branches.append(br)
            continue
        y = 1 / complex(br["R"], br["X"])
        branches += [
            {"id": "X7-8", "from": "7", "to": "8", "model": "RegulatingTransformer",
             "Y_T": [y.real, y.imag], "m0": 1.0, "alpha0": 0.0, "control": {"k_alpha": k_alpha}},
            {"id": "B7", "from": "7", "model": "ShuntGC", "B": br["B"] / 2},
            {"id": "B8", "from": "8", "model": "ShuntGC", "B": br["B"] / 2},
        ]
    doc["branches"] = branches
    doc["events"] = []
    return case_from_dict(doc, "wscc9_xfmr")


@pytest.fixture(scope="session")
def wscc():
    return bundled_case("wscc9")


@pytest.fixture(scope="session")
def dc_case():
    return bundled_case("mtdc_dc")


@pytest.fixture(scope="session")
def hybrid_case():
    return bundled_case("mtdc_hybrid")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


_cache = {}


def cached_simulation(name, tstop, dt):
    """Simulations shared between test modules; each runs at most once per session."""
    from cfgrid.analysis import decompose_trajectory
    from cfgrid.dynamics import simulate
    key = (name, tstop, dt)
    if key not in _cache:
        import time
        case = bundled_case(name)
        t0 = time.perf_counter()
        traj = simulate(case, tstop, dt)
        elapsed = time.perf_counter() - t0
        _cache[key] = (traj, decompose_trajectory(traj), elapsed)
    return _cache[key]


def random_network(rng, n_bus):
    """
    Connected mixed AC/DC case with random branches plus a random voltage profile.

    Returns ``(case, V, converters, transformers)`` ready for ``element_blocks``.
    """
    n_dc = int(rng.integers(0, max(1, n_bus // 3) + 1)) if n_bus >= 4 else 0
    n_ac = n_bus - n_dc
    ac = [f"a{k}" for k in range(n_ac)]
    dc = [f"d{k}" for k in range(n_dc)]
    buses = [{"id": b, "kind": "AC", "base_kv": 100.0, **({"type": "slack"} if k == 0 else {})}
             for k, b in enumerate(ac)]
    buses += [{"id": b, "kind": "DC", "base_kv": 100.0} for b in dc]
    branches = []

    def ac_branch(i, f, t):
        kind = rng.integers(4)
        r, x = rng.uniform(0.001, 0.1), rng.uniform(0.01, 0.5)
        if kind == 0:
            return {"id": i, "from": f, "to": t, "model": "ConstantY", "Y": [rng.uniform(0.1, 5), -rng.uniform(1, 30)]}
        if kind == 1:
            return {"id": i, "from": f, "to": t, "model": "PiLine", "R": r, "X": x, "B": rng.uniform(0, 0.4)}
        if kind == 2:
            return {"id": i, "from": f, "to": t, "model": "SeriesRL", "R": r, "X": x}
        return {"id": i, "from": f, "to": t, "model": "RegulatingTransformer", "R": r, "X": x,
                "m0": rng.uniform(0.9, 1.1), "alpha0": rng.uniform(-0.2, 0.2)}

    def dc_branch(i, f, t):
        if rng.integers(2):
            return {"id": i, "from": f, "to": t, "model": "PiLine", "R": rng.uniform(0.005, 0.1),
                    "L": rng.uniform(1e-4, 1e-2), "C_half": rng.uniform(0, 0.1)}
        return {"id": i, "from": f, "to": t, "model": "SeriesRL", "R": rng.uniform(0.005, 0.1), "L": rng.uniform(1e-4, 1e-2)}

    for group, make in ((ac, ac_branch), (dc, dc_branch)):
        for k in range(1, len(group)):
            j = int(rng.integers(k))
            branches.append(make(f"t{group[k]}", group[j], group[k]))
        for e in range(len(group) // 3):
            f, t = rng.choice(len(group), 2, replace=False)
            branches.append(make(f"x{group[0]}{e}", group[f], group[t]))
    for e, b in enumerate(ac[:: max(1, n_ac // 3)]):
        branches.append({"id": f"sh{e}", "from": b, "model": "ShuntGC", "G": rng.uniform(0, 0.05),
                         "B": rng.uniform(0.01, 0.3)})
    converters = {}
    if dc:
        for e in range(1 + int(rng.integers(2))):
            a, d = ac[int(rng.integers(n_ac))], dc[int(rng.integers(n_dc))]
            cid = f"c{e}"
            branches.append({"id": cid, "from": a, "to": d, "model": "AcDcConverter",
                             "R": rng.uniform(0.001, 0.01), "X": rng.uniform(0.05, 0.2),
                             "control": {"d_mode": "v_dc", "v_dc_ref": 1.0} if e == 0 else {"d_mode": "P", "p_ref": 0.1}})
            converters[cid] = {"m": rng.uniform(0.8, 1.2), "alpha": rng.uniform(-0.3, 0.3)}
    devices = [{"id": f"ld{k}", "bus": b, "model": "ConstantPowerLoad", "P": 0.1}
               for k, b in enumerate(ac[1:] + dc) if rng.integers(2)]
    case = case_from_dict({"base_mva": 100.0, "buses": buses, "branches": branches, "devices": devices},
                          f"random{n_bus}")
    V = np.empty(case.n_bus, dtype=complex)
    for k, b in enumerate(case.buses):
        mag = rng.uniform(0.9, 1.1)
        V[k] = mag if b.is_dc else mag * np.exp(1j * rng.uniform(-0.5, 0.5))
    transformers = {br.id: (rng.uniform(0.9, 1.1), rng.uniform(-0.2, 0.2))
                    for br in case.branches if br.model.__class__.__name__ == "RegulatingTransformer"}
    return case, V, converters, transformers


def bus_coefficients(case, V, converters=None, transformers=None):
    """``bus id -> (c_chi, c_eta, c_xi, Y_hh)`` at an arbitrary voltage profile."""
    from cfgrid.analysis import compute_coefficients, device_injections, element_blocks, incident
    blocks = element_blocks(case, V, converters, transformers)
    inj = device_injections(case, V, blocks)
    elements = case.elements()
    out = {}
    for h, b in enumerate(case.buses):
        inc = [(el, port, blocks[el.id]) for el, port in incident(case, h, elements)]
        out[b.id] = compute_coefficients(h, V, inc, inj[h])
    return out


ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion; printed at the end of the session."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
