import numpy as np
import pytest


def write_csv(path, names, units, columns):
    rows = [",".join(names), ",".join(units)]
    for vals in zip(*columns):
        rows.append(",".join("%.12e" % v for v in vals))
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture
def dispersion_csv(tmp_path):
    k = np.linspace(1e5, 4e7, 40)
    f = 2.78 + 1e-16 * (k - 6e6) ** 2
    g = 0.09 * np.exp(-((k - 6e6) / 1e7) ** 2)
    return write_csv(tmp_path / "dispersion.csv",
                     ["k_rad_per_m", "f_ghz", "coupling_abs"],
                     ["rad/m", "GHz", "1"], [k, f, g])


@pytest.fixture
def wg_map_csv(tmp_path):
    xs = np.linspace(21.0, 80.0, 12)
    ys = np.linspace(-120.0, 240.0, 12)
    x, y, g = [], [], []
    for xi in xs:
        for yi in ys:
            x.append(xi)
            y.append(yi)
            g.append(0.25 * np.exp(-xi / 40.0 - abs(yi) / 200.0))
    return write_csv(tmp_path / "coupling_map.csv",
                     ["x_nm", "y_nm", "coupling_abs"],
                     ["nm", "nm", "1"], [x, y, g])


@pytest.fixture
def bar_map_csv(tmp_path):
    z = np.linspace(150.0, 2850.0, 30)
    g = 520.0 * np.abs(np.sin(np.pi * 5 * z / 3000.0))
    c = 1.0 + (g / 520.0) ** 2 * 6e4
    return write_csv(tmp_path / "coupling_map.csv",
                     ["z_nm", "g_over_2pi_khz", "cooperativity"],
                     ["nm", "kHz", "1"], [z, g, c])


def _trace(tmp_path, name):
    t = np.linspace(0.0, 2.0, 25)
    p1 = np.sin(2 * t) ** 2
    p2 = np.cos(2 * t) ** 2
    n = 0.1 * np.sin(4 * t) ** 2
    neg = 0.4 * p1
    chsh = np.maximum(0.0, neg - 0.2)
    fid = 0.5 + 0.4 * p1
    return write_csv(tmp_path / name,
                     ["t_us", "p1e", "p2e", "n_mean", "negativity_norm",
                      "chsh", "fidelity"],
                     ["us", "1", "1", "1", "1", "1", "1"],
                     [t, p1, p2, n, neg, chsh, fid])


@pytest.fixture
def trace_csvs(tmp_path):
    return (_trace(tmp_path, "transduction_70mk.csv"),
            _trace(tmp_path, "exchange_70mk.csv"))


@pytest.fixture
def phase_csv(tmp_path):
    alphas = np.geomspace(1e-8, 1e-6, 5)
    gammas = np.linspace(0.0, 1e3, 4)
    a, g, on, off, win = [], [], [], [], []
    for al in alphas:
        for gm in gammas:
            a.append(al)
            g.append(gm)
            f_on = 1.0 - 1e5 * al - 1e-4 * gm
            f_off = 0.97 - 1e4 * al - 5e-5 * gm
            on.append(f_on)
            off.append(f_off)
            win.append(float(np.sign(f_on - f_off)))
    return write_csv(tmp_path / "phase_diagram.csv",
                     ["alpha", "gamma2", "fid_onres", "fid_offres",
                      "winner"],
                     ["1", "rad/s", "1", "1", "sign"],
                     [a, g, on, off, win])
