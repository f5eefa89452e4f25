import io
import json
import math
import subprocess
import sys

import pytest

from infradius.cli import parse_divergence, parse_mean, run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return str(path)

    return {
        "a": write("a.json", {"type": "discrete", "probs": [0.2, 0.8]}),
        "b": write("b.json", {"type": "discrete", "probs": [0.6, 0.4]}),
        "two": write(
            "two.json",
            {"members": [{"type": "discrete", "probs": [1, 0]}, {"type": "discrete", "probs": [0, 1]}]},
        ),
        "gset": write(
            "gset.json",
            {
                "weights": [1, 1, 1, 1, 1, 1],
                "members": [{"type": "gaussian", "mu": m, "sigma": 1} for m in (0, 0.1, -0.1, 8, 8.1, 7.9)],
            },
        ),
        "mix": write(
            "mix.json",
            {
                "type": "mixture",
                "weights": [1, 1, 1, 1],
                "components": [{"type": "gaussian", "mu": m, "sigma": 1} for m in (-5, -5.01, 5, 5.01)],
            },
        ),
        "gmix": write(
            "gmix.json",
            {
                "type": "mixture",
                "weights": [0.5, 0.5],
                "components": [{"type": "gaussian", "mu": -1, "sigma": 1}, {"type": "gaussian", "mu": 1, "sigma": 1}],
            },
        ),
        "bad": write("bad.json", {"type": "discrete", "probs": [0.5, 0.6]}),
        "dir": str(tmp_path),
    }


def test_divergence_of_identical_is_zero(files):
    code, out, _ = call("divergence", "--kind", "kld", "--p", files["a"], "--q", files["a"])
    assert code == 0 and float(out) == 0.0


def test_radius_inf_two_point(files):
    code, out, _ = call("radius", "--alpha", "inf", "--set", files["two"])
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(math.log(2), abs=1e-15)
    code, out, _ = call("radius", "--alpha", "inf", "--set", files["two"], "--base", "bits")
    assert json.loads(out)["value"] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("kind", ["kld", "reverse_kld", "jsd", "bhattacharyya_distance"])
def test_bits_is_nats_over_ln2(files, kind):
    _, nats, _ = call("divergence", "--kind", kind, "--p", files["a"], "--q", files["b"])
    _, bits, _ = call("divergence", "--kind", kind, "--p", files["a"], "--q", files["b"], "--base", "bits")
    assert float(bits) == float(nats) / math.log(2)


def test_unitless_kinds_not_rescaled(files):
    _, nats, _ = call("divergence", "--kind", "tv", "--p", files["a"], "--q", files["b"])
    _, bits, _ = call("divergence", "--kind", "tv", "--p", files["a"], "--q", files["b"], "--base", "bits")
    assert float(nats) == float(bits) == pytest.approx(0.4)


def test_divergence_inf_printed(files, tmp_path):
    z = tmp_path / "z.json"
    z.write_text(json.dumps({"type": "discrete", "probs": [1, 0]}))
    code, out, _ = call("divergence", "--kind", "kld", "--p", files["a"], "--q", str(z))
    assert code == 0 and out.strip() == "inf"


def test_entropy(files):
    code, out, _ = call("entropy", "--p", files["a"])
    assert code == 0
    assert float(out) == pytest.approx(-(0.2 * math.log(0.2) + 0.8 * math.log(0.8)))
    _, out, _ = call("entropy", "--p", files["a"], "--alpha", "2")
    assert float(out) == pytest.approx(-math.log(0.68))


def test_variational_radius_with_trace(files, tmp_path):
    trace = tmp_path / "trace.csv"
    code, out, _ = call(
        "radius", "--set", files["two"], "--variational", "--mean", "arithmetic", "--divergence", "kld", "--trace", str(trace)
    )
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(math.log(2), abs=1e-8)
    assert trace.read_text().splitlines()[0] == "iteration,objective,residual"


def test_centroid_and_project(files):
    code, out, _ = call("centroid", "--set", files["two"], "--alpha", "2")
    assert code == 0
    assert json.loads(out) == {"type": "discrete", "probs": [0.5, 0.5]}
    code, out, _ = call("project", "--p", files["gmix"], "--family", "gaussian")
    assert code == 0
    d = json.loads(out)
    assert d["mu"] == pytest.approx(0.0, abs=1e-12) and d["sigma"] == pytest.approx(math.sqrt(2))


def test_relative_radius(files):
    code, out, _ = call("radius", "--relative", "--family", "gaussian", "--set", files["gset"])
    assert code == 0
    d = json.loads(out)
    assert d["value"] > 0 and d["centroid"]["type"] == "gaussian"


def test_cluster_deterministic(files):
    first = call("cluster", "--set", files["gset"], "--k", "2", "--seed", "7")
    second = call("cluster", "--set", files["gset"], "--k", "2", "--seed", "7")
    assert first[0] == 0 and first[1] == second[1]
    a = json.loads(first[1])["assignment"]
    assert a[0] == a[1] == a[2] != a[3] == a[4] == a[5]
    code, out, _ = call("cluster", "--set", files["gset"], "--k", "2", "--format", "csv")
    assert out.splitlines()[0] == "iteration,objective,residual"


def test_quantize(files):
    code, out, _ = call("quantize", "--mixture", files["mix"], "--k", "2")
    assert code == 0
    d = json.loads(out)
    assert d["mixture"]["weights"] == pytest.approx([0.5, 0.5])
    assert d["jsd"] >= 0


def test_input_errors(files):
    assert call("divergence", "--kind", "kld", "--p", files["dir"] + "/missing.json", "--q", files["a"])[0] == 2
    code, _, err = call("divergence", "--kind", "kld", "--p", files["bad"], "--q", files["a"])
    assert code == 2 and "probs" in err
    assert call("divergence", "--kind", "kld", "--p", files["a"], "--q", files["gmix"])[0] == 2
    assert call("frobnicate")[0] == 2
    assert call("radius", "--set", files["two"], "--alpha", "-1")[0] == 2
    assert call("radius", "--set", files["two"], "--grid-n", "2")[0] == 2
    assert call("quantize", "--mixture", files["a"], "--k", "1")[0] == 2


def test_nonconvergence_exit_code(files, tmp_path):
    code, out, _ = call("cluster", "--set", files["gset"], "--k", "3", "--max-iters", "1", "--seed", "1")
    d = json.loads(out)
    assert code == (0 if d["converged"] else 3)
    three = tmp_path / "three.json"
    probs = [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6], [0.3, 0.3, 0.4]]
    three.write_text(json.dumps({"members": [{"type": "discrete", "probs": p} for p in probs]}))
    code, out, _ = call(
        "radius", "--set", str(three), "--variational", "--mean", "renyi:2", "--divergence", "renyi:2", "--max-iters", "1"
    )
    assert code == 3 and out  # best-so-far still printed


def test_threads_env(files, monkeypatch):
    monkeypatch.setenv("INFRADIUS_THREADS", "2")
    code, out, _ = call("radius", "--set", files["two"], "--variational", "--divergence", "tv", "--mean", "power:2")
    assert code == 0
    monkeypatch.setenv("INFRADIUS_THREADS", "0")
    assert call("radius", "--set", files["two"])[0] == 2


def test_parse_helpers():
    w = (0.5, 0.5)
    assert parse_mean("renyi:2", w).alpha == 2
    assert parse_mean("power:0.5", w).exponent == 0.5
    assert parse_mean("quasi_arithmetic:exp,2", w).generator == "exp"
    assert parse_mean(None, w).kind == "arithmetic"
    assert parse_divergence("skew_jsd:0.3,0.7").beta == 0.7
    assert parse_divergence("renyi:2").alpha == 2
    with pytest.raises(ValueError):
        parse_divergence("skew_jsd:0.3")
    with pytest.raises(ValueError):
        parse_mean("geometric:3", w)


def test_module_entry_point(files):
    res = subprocess.run(
        [sys.executable, "-m", "infradius", "divergence", "--kind", "tv", "--p", files["a"], "--q", files["b"]],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and float(res.stdout) == pytest.approx(0.4)
