import pytest

from colk.config import build_config, load_config, parse_override, parse_text, resolve_key
from colk.errors import ConfigError
from colk.kernel import PolynomialKernel


def test_parse_text_sections_and_comments():
    vals = parse_text("# header\nlearner.alpha = 0.05   # step\n\nrun.n_iters=10\n")
    assert vals == {"learner.alpha": "0.05", "run.n_iters": "10"}


def test_parse_rejects_bad_lines():
    with pytest.raises(ConfigError, match="cfg:2"):
        parse_text("run.n_iters = 1\nnot a pair\n", "cfg")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_text("learner.alhpa = 1\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_text("model.alpha = 1\n")


def test_bare_key_resolution():
    assert resolve_key("alpha") == "learner.alpha"
    assert resolve_key("n_iters") == "run.n_iters"
    assert resolve_key("lambda") == "learner.lam"
    assert resolve_key("polk.lambda") == "polk.lam"
    with pytest.raises(ConfigError, match="ambiguous"):
        resolve_key("seed")
    with pytest.raises(ConfigError):
        resolve_key("nope")


def test_defaults():
    cfg = build_config()
    colk = cfg.learner_config("colk")
    assert (colk.alpha, colk.beta, colk.eta) == (0.02, 0.01, 0.1)
    assert colk.eps == pytest.approx(5 * 0.02**2)
    assert colk.kernel.bandwidth == 0.06
    polk = cfg.learner_config("polk")
    assert polk.alpha == 0.5 and polk.eps == pytest.approx(0.09 * 0.5**2) and polk.eta == 0.0
    assert cfg.n_replicates == 20 and cfg.data.n == 6000
    assert cfg.method_params("rbf")["n_centers"] == 50


def test_precedence():
    cfg = build_config({"learner.alpha": "0.05", "polk.alpha": "0.3", "learner.eps": "0.01"})
    assert cfg.learner_config("colk").alpha == 0.05
    assert cfg.learner_config("polk").alpha == 0.3
    assert cfg.learner_config("colk").eps == 0.01


def test_parsimony_sets_budget():
    cfg = build_config({"colk.parsimony": "2", "learner.alpha": "0.1"})
    assert cfg.learner_config("colk").eps == pytest.approx(2 * 0.01)


def test_polynomial_kernel_option():
    cfg = build_config({"learner.kernel": "polynomial", "learner.poly_degree": "3"})
    assert cfg.learner_config("colk").kernel == PolynomialKernel(1.0, 3)


@pytest.mark.parametrize(
    "override, fragment",
    [
        ("alpha=-1", "alpha must be > 0"),
        ("learner.beta=1.5", "beta"),
        ("learner.kernel=laplace", "kernel"),
        ("run.eval_every=0", "eval_every"),
        ("run.method=svm", "method"),
        ("data.test_frac=1", "test_frac"),
        ("run.n_iters=abc", "cannot parse"),
        ("data.minmax=maybe", "cannot parse"),
        ("bsgd.max_order=0", "max_order"),
    ],
)
def test_validation_names_constraint(override, fragment):
    with pytest.raises(ConfigError, match=fragment):
        load_config(None, [override])


def test_override_requires_pair():
    with pytest.raises(ConfigError):
        parse_override("alpha")


def test_load_file_with_overrides(tmp_path):
    p = tmp_path / "base.cfg"
    p.write_text("run.n_iters = 100\nlearner.alpha = 0.03\n")
    cfg = load_config(p, ["run.n_iters=7"])
    assert cfg.n_iters == 7 and cfg.learner_config("colk").alpha == 0.03
    assert cfg.methods == ("colk", "polk")
    assert load_config(None, ["run.methods=colk, bsgd,rbf"]).methods == ("colk", "bsgd", "rbf")
