"""Render every figure kind from the committed sample tables.

The samples under ``samples/`` were produced by the solver package's own
command line driver and are committed so these tests run without it."""

from pathlib import Path

import pytest

from plots import FigureError, FigureSpec, load_table, render
from plots.cli import main

SAMPLES = Path(__file__).resolve().parent.parent / "samples"

INPUTS = {
    "welfare": ("results.csv",),
    "strategy": ("results.csv",),
    "regret": ("trace_ribr.csv", "trace_sa.csv", "trace_rs.csv"),
    "poa": ("poa_multitarget.csv", "poa_general.csv"),
    "centrality": ("centrality.csv",),
}


def cli_args(kind, out):
    args = [kind]
    for name in INPUTS[kind]:
        args += ["--in", str(SAMPLES / name)]
    return args + ["--out", str(out)]


@pytest.mark.parametrize("kind", sorted(INPUTS))
def test_every_kind_renders_a_png(kind, tmp_path):
    out = tmp_path / f"{kind}.png"
    assert main(cli_args(kind, out)) == 0
    data = out.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 5_000


def test_rendering_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    assert main(cli_args("welfare", a)) == 0
    assert main(cli_args("welfare", b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_poa_sample_has_the_expected_shape():
    # c/v = 0.1 with two defenders: the ratio sits at 1 while coverage is
    # affordable (k <= 5), climbs once it is not, and levels off below 3
    df = load_table(SAMPLES / "poa_multitarget.csv", "poa")
    poa = dict(zip(df["k"], df["poa"]))
    assert all(poa[k] == 1.0 for k in range(1, 6))
    ks = sorted(k for k in poa if k >= 5)
    assert all(poa[a] < poa[b] for a, b in zip(ks, ks[1:]))
    assert poa[ks[-1]] > 2.5
    assert max(poa.values()) < 3.0


def test_welfare_draws_one_line_per_p(tmp_path):
    from plots import figures
    spec = FigureSpec("welfare", (SAMPLES / "results.csv",), tmp_path / "w.png")
    fig = figures._fig_welfare(spec)
    try:
        labels = [l.get_label() for l in fig.axes[0].get_lines()]
        df = load_table(SAMPLES / "results.csv", "welfare")
        assert sorted(l for l in labels if l.startswith("p = ")) == \
            sorted(f"p = {p:g}" for p in df["p"].unique())
    finally:
        import matplotlib.pyplot as plt
        plt.close(fig)


def test_empty_csv_is_an_error_exit(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["poa", "--in", str(empty), "--out", str(tmp_path / "x.png")]) == 2
    assert "empty" in capsys.readouterr().err


def test_header_only_csv_is_an_error_exit(tmp_path, capsys):
    bare = tmp_path / "bare.csv"
    bare.write_text("k,poa\n")
    assert main(["poa", "--in", str(bare), "--out", str(tmp_path / "x.png")]) == 2
    assert "no data rows" in capsys.readouterr().err


def test_missing_columns_are_reported_by_name(tmp_path, capsys):
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("a,b\n1,2\n")
    assert main(["welfare", "--in", str(wrong), "--out", str(tmp_path / "x.png")]) == 2
    err = capsys.readouterr().err
    assert "missing columns" in err and "welfare_eq" in err


def test_absent_file_is_an_error_exit(tmp_path, capsys):
    assert main(["poa", "--in", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "x.png")]) == 2
    assert "no such file" in capsys.readouterr().err


def test_unknown_kind_is_rejected_by_the_parser(tmp_path):
    with pytest.raises(SystemExit):
        main(["sparkline", "--in", "x.csv", "--out", str(tmp_path / "x.png")])


def test_spec_validates_kind_and_inputs(tmp_path):
    with pytest.raises(FigureError, match="unknown figure kind"):
        FigureSpec("sparkline", (SAMPLES / "results.csv",), tmp_path / "x.png")
    with pytest.raises(FigureError, match="at least one"):
        FigureSpec("welfare", (), tmp_path / "x.png")
