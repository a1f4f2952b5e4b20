import json
import os
import socket
import threading

import pytest
from click.testing import CliRunner

from blindprofile.cli import main as cli_main
from blindprofile.client import ProfileClient, extract_inputs
from blindprofile.dealersvc import fetch_bundle, start_in_thread as start_dealer
from blindprofile.errors import DealerUnavailable, EmptyText, HandshakeMismatch
from blindprofile.models import ModelBank
from blindprofile.ring import Party, RingParams
from blindprofile.rng import Drbg
from blindprofile.server import ProfileServer, ServerConfig, start_in_thread
from blindprofile.svm import clear_profile_from_bank
from blindprofile.transport import (
    ERROR,
    HELLO,
    MODE_COMPARE,
    MODE_PRIVATE,
    Handshake,
    TcpChannel,
    decode_frame,
    encode_frame,
)
from blindprofile.triples import deal, plan_session, read_bundle

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
BANK_DIR = os.path.join(FIXTURES, "bank")
MRC = os.path.join(FIXTURES, "mrc_toy.tsv")
NRC = os.path.join(FIXTURES, "nrc_toy.txt")
ESSAY = os.path.join(FIXTURES, "essay.txt")
LANDMARKS = os.path.join(FIXTURES, "landmarks.txt")


def deal_files(tmp_path, sessions=1, seed=42):
    os.makedirs(tmp_path, exist_ok=True)
    runner = CliRunner()
    out_a = str(tmp_path / "a.vit")
    out_b = str(tmp_path / "b.vit")
    args = [
        "deal", "--models", BANK_DIR, "--out", f"{out_a},{out_b}",
        "--seed", str(seed), "--sessions", str(sessions),
    ]
    result = runner.invoke(cli_main, args)
    assert result.exit_code == 0, result.output
    return out_a, out_b


def fixture_inputs():
    text = open(ESSAY, encoding="utf-8").read()
    return extract_inputs(text, LANDMARKS, MRC, NRC)


# --- dealer CLI ---

def test_deal_seeded_reproducible(tmp_path):
    a1, b1 = deal_files(tmp_path / "one")
    a2, b2 = deal_files(tmp_path / "two")
    assert open(a1, "rb").read() == open(a2, "rb").read()
    assert open(b1, "rb").read() == open(b2, "rb").read()


def test_deal_missing_bank_exit_2(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        ["deal", "--models", str(tmp_path / "nope"), "--out", "a.vit,b.vit"],
    )
    assert result.exit_code == 2


def test_deal_multiple_sessions(tmp_path):
    deal_files(tmp_path, sessions=3)
    names = sorted(os.listdir(tmp_path))
    assert names == ["a-0.vit", "a-1.vit", "a-2.vit", "b-0.vit", "b-1.vit", "b-2.vit"]
    plan = plan_session([136] * 4 + [43] * 5, RingParams(64))
    for name in names:
        bundle = read_bundle(str(tmp_path / name))
        assert len(bundle.matrix) == 9
        assert len(bundle.bits) == plan.bit_count


# --- full sessions over TCP ---

def start_fixture_server(bundle_paths=(), **kwargs):
    config = ServerConfig(bank_dir=BANK_DIR, bundle_paths=list(bundle_paths), **kwargs)
    return start_in_thread(config)


def test_compare_session_over_tcp(tmp_path):
    out_a, out_b = deal_files(tmp_path)
    server = start_fixture_server([out_b])
    try:
        landmarks, text_vec = fixture_inputs()
        client = ProfileClient(mode=MODE_COMPARE, bundle_path=out_a)
        outcome = client.run_tcp("127.0.0.1", server.config.port, landmarks, text_vec)
    finally:
        server.stop()
    oracle = clear_profile_from_bank(
        ModelBank.load_dir(BANK_DIR), landmarks, text_vec, RingParams(64)
    )
    assert outcome.clear == oracle
    assert outcome.private == oracle
    assert outcome.clear_seconds > 0 and outcome.private_seconds > 0
    assert set(outcome.clear_margins) == {m.task for m in ModelBank.load_dir(BANK_DIR).models}


def test_two_concurrent_private_clients(tmp_path):
    out_a, out_b = deal_files(tmp_path, sessions=2)
    b_paths = [str(tmp_path / "b-0.vit"), str(tmp_path / "b-1.vit")]
    server = start_fixture_server(b_paths)
    landmarks, text_vec = fixture_inputs()
    oracle = clear_profile_from_bank(
        ModelBank.load_dir(BANK_DIR), landmarks, text_vec, RingParams(64)
    )
    outcomes = {}

    def run_one(pair_id):
        client = ProfileClient(
            mode=MODE_PRIVATE, bundle_path=str(tmp_path / f"a-{pair_id}.vit")
        )
        outcomes[pair_id] = client.run_tcp(
            "127.0.0.1", server.config.port, landmarks, text_vec
        )

    try:
        threads = [threading.Thread(target=run_one, args=(k,)) for k in (0, 1)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=60)
    finally:
        server.stop()
    assert outcomes[0].private == oracle
    assert outcomes[1].private == oracle
    assert len(server.pool) == 0  # both bundles claimed, none shared


def test_unknown_mode_refused(tmp_path):
    server = start_fixture_server()
    try:
        sock = socket.create_connection(("127.0.0.1", server.config.port), timeout=10)
        chan = TcpChannel(sock)
        bogus = Handshake(
            version=1, ell=64, frac_bits=16, mode=9, variant=0, pair_id=0,
            catalog_hash=bytes(32), catalog=b"",
        )
        chan.send_frame(encode_frame(HELLO, 0, bogus.encode()))
        reply = decode_frame(chan.recv_frame())
        assert reply.ftype == ERROR
        chan.close()
    finally:
        server.stop()


def test_handshake_ring_mismatch(tmp_path):
    out_a, _ = deal_files(tmp_path)
    server = start_fixture_server()
    try:
        landmarks, text_vec = fixture_inputs()
        client = ProfileClient(mode=MODE_COMPARE, ell=64, frac_bits=8, bundle_path=out_a)
        with pytest.raises(HandshakeMismatch):
            client.run_tcp("127.0.0.1", server.config.port, landmarks, text_vec)
    finally:
        server.stop()


def test_empty_bank_refuses_profiles(tmp_path):
    empty = tmp_path / "empty-bank"
    empty.mkdir()
    config = ServerConfig(bank_dir=str(empty))
    server = start_in_thread(config)
    try:
        landmarks, text_vec = fixture_inputs()
        client = ProfileClient(mode=MODE_COMPARE)
        client.bundle = None
        with pytest.raises(HandshakeMismatch):
            client.run_tcp("127.0.0.1", server.config.port, landmarks, text_vec)
    finally:
        server.stop()


# --- client CLI ---

def test_client_empty_text_exit_5(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "client", "--text-inline", "?!... 123", "--landmarks", LANDMARKS,
            "--mode", "clear", "--mrc", MRC, "--nrc", NRC,
            "--server", "127.0.0.1:1",  # never reached
        ],
    )
    assert result.exit_code == 5


def test_client_private_without_bundle_exit_2():
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "client", "--text-inline", "hello world", "--landmarks", LANDMARKS,
            "--mode", "private", "--mrc", MRC, "--nrc", NRC,
        ],
    )
    assert result.exit_code == 2


def test_client_connection_refused_exit_3(tmp_path):
    out_a, _ = deal_files(tmp_path)
    runner = CliRunner()
    result = runner.invoke(
        cli_main,
        [
            "client", "--text", ESSAY, "--landmarks", LANDMARKS,
            "--mode", "private", "--bundle", out_a, "--mrc", MRC, "--nrc", NRC,
            "--server", "127.0.0.1:1",
        ],
    )
    assert result.exit_code == 3


def test_client_cli_compare_against_live_server(tmp_path):
    out_a, out_b = deal_files(tmp_path)
    server = start_fixture_server([out_b])
    try:
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            [
                "client", "--text", ESSAY, "--landmarks", LANDMARKS,
                "--mode", "compare", "--bundle", out_a, "--mrc", MRC, "--nrc", NRC,
                "--server", f"127.0.0.1:{server.config.port}",
            ],
        )
    finally:
        server.stop()
    assert result.exit_code == 0, result.output
    assert "clear and private results are identical" in result.output
    assert "age bracket:" in result.output


# --- dealer service ---

def make_dealer_stock(sessions=1, seed=9):
    plan = plan_session([136] * 4 + [43] * 5, RingParams(64))
    rng = Drbg(seed=seed)
    stock = {}
    for k in range(sessions):
        alice, bob = deal(plan, rng)
        stock[(Party.ALICE, k)] = alice
        stock[(Party.BOB, k)] = bob
    return stock


def test_dealer_service_serves_each_half_once():
    dealer = start_dealer(make_dealer_stock())
    a = fetch_bundle("127.0.0.1", dealer.port, Party.ALICE, 0)
    assert a.party is Party.ALICE
    assert len(a.matrix) == 9
    from blindprofile.errors import ProtocolError

    with pytest.raises(ProtocolError):
        fetch_bundle("127.0.0.1", dealer.port, Party.ALICE, 0)


def test_wire_dealt_session_completes():
    dealer = start_dealer(make_dealer_stock())
    server = start_fixture_server()
    try:
        server.fetch_bundles_from_dealer("127.0.0.1", dealer.port, [0])
        landmarks, text_vec = fixture_inputs()
        client = ProfileClient(mode=MODE_PRIVATE)
        client.fetch_bundle_from_dealer("127.0.0.1", dealer.port, 0)
        outcome = client.run_tcp("127.0.0.1", server.config.port, landmarks, text_vec)
    finally:
        server.stop()
    oracle = clear_profile_from_bank(
        ModelBank.load_dir(BANK_DIR), landmarks, text_vec, RingParams(64)
    )
    assert outcome.private == oracle


def test_dealer_refused_after_session_start(tmp_path):
    out_a, out_b = deal_files(tmp_path)
    dealer = start_dealer(make_dealer_stock(sessions=2, seed=11))
    server = start_fixture_server([out_b])
    try:
        landmarks, text_vec = fixture_inputs()
        client = ProfileClient(mode=MODE_PRIVATE, bundle_path=out_a)
        client.run_tcp("127.0.0.1", server.config.port, landmarks, text_vec)
        with pytest.raises(DealerUnavailable):
            client.fetch_bundle_from_dealer("127.0.0.1", dealer.port, 0)
        with pytest.raises(DealerUnavailable):
            server.fetch_bundles_from_dealer("127.0.0.1", dealer.port, [1])
    finally:
        server.stop()


# --- bench ---

def test_bench_zero_runs_empty_report():
    runner = CliRunner()
    result = runner.invoke(cli_main, ["bench", "--runs", "0"])
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["results"] == []


def test_bench_small_run_structure():
    from blindprofile.bench import run_bench

    report = run_bench(2, [8])
    assert report["runs"] == 2
    (entry,) = report["results"]
    assert entry["ell"] == 8
    assert entry["clear"]["mean_s"] > 0
    assert entry["private"]["mean_s"] > 0
    assert entry["slowdown_private_over_clear"] > 0
    assert report["reference"]["slowdown_clear_vs_private"] == 3.0


def test_bench_latency_grows_with_ring_size():
    from blindprofile.bench import run_bench

    report = run_bench(3, [8, 64])
    by_ell = {e["ell"]: e for e in report["results"]}
    assert by_ell[8]["private"]["min_s"] < by_ell[64]["private"]["min_s"]
