"""
Тесты командной строки: коды возврата и выходные файлы
"""

import json

import pytest

from main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, build_parser, main


@pytest.mark.asyncio
async def test_expand_rcf(capsys):
    code = await main(["expand", "--q", "3", "--alpha", "1", "--x", "0.5", "--n", "5"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "(+1:2)" in out
    assert "⏹" in out


@pytest.mark.asyncio
async def test_expand_left_endpoint(capsys):
    code = await main(["expand", "--q", "4", "--x=-lambda/2", "--n", "10"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "(-1:1)" in out
    assert "на шаге 1" in out


@pytest.mark.asyncio
async def test_expand_outside_interval():
    assert await main(["expand", "--q", "4", "--x", "0.9"]) == EXIT_USAGE


@pytest.mark.asyncio
async def test_expand_bad_token():
    assert await main(["expand", "--q", "4", "--x", "pi"]) == EXIT_USAGE


@pytest.mark.asyncio
async def test_bad_q():
    assert await main(["verify", "--q", "2"]) == EXIT_USAGE


@pytest.mark.asyncio
async def test_bad_alpha():
    assert await main(["domain", "--q", "4", "--alpha", "0.8"]) == EXIT_USAGE
    assert await main(["domain", "--q", "4", "--alpha", "rho/lambda"]) == EXIT_USAGE


@pytest.mark.asyncio
async def test_low_precision():
    assert await main(["domain", "--q", "4", "--precision", "32"]) == EXIT_USAGE


@pytest.mark.asyncio
async def test_verify_certificate(tmp_path, capsys):
    out = tmp_path / "verify.json"
    code = await main(["verify", "--q", "6", "--alpha", "53/100", "--out", str(out)])
    assert code == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["status"] == "PASS"
    assert payload["critical_digits"] == {"d_p(l0)": 2, "d_p(r0)": 3}
    assert payload["tiling"]["status"] == "PASS"


@pytest.mark.asyncio
async def test_domain_json(tmp_path):
    out = tmp_path / "domain.json"
    code = await main(["domain", "--q", "5", "--alpha", "0.5038", "--out", str(out)])
    assert code == EXIT_OK
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["regime"] == "ODD_LOW"
    assert len(payload["rectangles"]) == 7
    assert payload["dropped_intervals"] == 0
    assert payload["rectangles"][0]["left"]["exact"]


@pytest.mark.asyncio
async def test_domain_csv(tmp_path):
    out = tmp_path / "domain.csv"
    code = await main(["domain", "--q", "4", "--alpha", "1/2", "--format", "csv", "--out", str(out)])
    assert code == EXIT_OK
    text = out.read_text(encoding="utf-8")
    assert "# dropped_intervals: 1" in text
    assert "label,left,right,height" in text


@pytest.mark.asyncio
async def test_simulate_lenstra_odd():
    code = await main(["simulate", "--q", "5", "--alpha", "0.56", "--experiment", "lenstra", "--n", "1000"])
    assert code == EXIT_USAGE


@pytest.mark.asyncio
async def test_simulate_is_deterministic(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    args = ["simulate", "--q", "6", "--alpha", "0.53", "--experiment", "equidistribution", "--n", "20000", "--seed", "5"]
    assert await main(args + ["--out", str(first)]) == EXIT_OK
    assert await main(args + ["--out", str(second), "--threads", "4"]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


@pytest.mark.asyncio
async def test_simulate_lenstra_csv(tmp_path):
    out = tmp_path / "lenstra.csv"
    code = await main(["simulate", "--q", "4", "--experiment", "lenstra", "--n", "20000", "--format", "csv", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# experiment: lenstra"
    assert any(line.startswith("c,") for line in lines)


def test_parser_requires_experiment():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["simulate", "--q", "4"])


def test_exit_codes():
    assert (EXIT_OK, EXIT_FAILURE, EXIT_USAGE) == (0, 1, 2)


def test_simulate_help_mentions_float64(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["simulate", "--help"])
    assert "float64" in capsys.readouterr().out


@pytest.mark.asyncio
async def test_simulate_reports_float_precision(tmp_path):
    out = tmp_path / "equidistribution.json"
    args = ["simulate", "--q", "6", "--alpha", "0.53", "--experiment", "equidistribution", "--n", "5000", "--precision", "256"]
    assert await main(args + ["--out", str(out)]) == EXIT_OK
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["metadata"]["precision"] == 53
