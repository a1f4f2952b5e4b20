"""Command line front ends: deal, serve, client, bench.

Exit codes: 0 success, 2 configuration/usage, 3 connection, 4 handshake,
5 input extraction, 6 protocol failure, 1 unexpected internal error.
"""

from __future__ import annotations

import json
import logging
import os
import sys

import click

from .errors import (
    BadDimension,
    BlindProfileError,
    BundleFormatError,
    ChannelClosed,
    EmptyText,
    HandshakeMismatch,
    IoFailure,
    LexiconMissing,
    ParseError,
    ProtocolError,
    RoundDesync,
    TripleExhausted,
    ValidationError,
)
from .ring import Party, RingParams
from .rng import Drbg
from .triples import (
    BASIC,
    VARIANTS,
    deal,
    indexed_bundle_path,
    plan_session,
    write_bundle,
)

EXIT_CONFIG = 2
EXIT_CONNECT = 3
EXIT_HANDSHAKE = 4
EXIT_INPUT = 5
EXIT_PROTOCOL = 6

_INPUT_ERRORS = (EmptyText, BadDimension, LexiconMissing)
_CONFIG_ERRORS = (ParseError, ValidationError, BundleFormatError, IoFailure)
_PROTOCOL_ERRORS = (ProtocolError, RoundDesync, TripleExhausted)


def _exit_for(exc: BlindProfileError) -> int:
    if isinstance(exc, _INPUT_ERRORS):
        return EXIT_INPUT
    if isinstance(exc, HandshakeMismatch):
        return EXIT_HANDSHAKE
    if isinstance(exc, ChannelClosed):
        return EXIT_CONNECT
    if isinstance(exc, _PROTOCOL_ERRORS):
        return EXIT_PROTOCOL
    return EXIT_CONFIG


def _fail(exc: BlindProfileError) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(_exit_for(exc))


@click.group()
def main() -> None:
    """Two-party private SVM profiling."""
    logging.basicConfig(level=os.environ.get("BLINDPROFILE_LOG", "WARNING"))


@main.command("deal")
@click.option("--models", "models_dir", required=True, help="Model bank directory.")
@click.option("--out", "out_paths", default=None, help="Two bundle files: alice.vit,bob.vit")
@click.option("--seed", type=int, default=None, help="Deterministic dealing seed.")
@click.option("--sessions", type=int, default=1, show_default=True)
@click.option("--ell", type=int, default=64, show_default=True)
@click.option("--variant", type=click.Choice(VARIANTS), default=BASIC, show_default=True)
@click.option("--listen", type=int, default=None, help="Serve bundles once over TCP on this port.")
def deal_cmd(models_dir, out_paths, seed, sessions, ell, variant, listen):
    """Pre-distribute correlated randomness for profile sessions."""
    from .models import ModelBank

    if out_paths is None and listen is None:
        click.echo("error: need --out and/or --listen", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        bank = ModelBank.load_dir(models_dir)
        plan = plan_session([m.dim for m in bank.models], RingParams(ell), variant)
    except (BlindProfileError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    rng = Drbg(seed=seed)
    pairs = [deal(plan, rng) for _ in range(sessions)]
    try:
        if out_paths is not None:
            names = [p.strip() for p in out_paths.split(",")]
            if len(names) != 2:
                click.echo("error: --out needs exactly two comma-separated paths", err=True)
                sys.exit(EXIT_CONFIG)
            for k, (alice, bob) in enumerate(pairs):
                write_bundle(alice, indexed_bundle_path(names[0], k, sessions))
                write_bundle(bob, indexed_bundle_path(names[1], k, sessions))
            click.echo(
                f"dealt {sessions} session(s): {len(plan.shapes)} matrix triples and "
                f"{plan.bit_count} bit triples each"
            )
    except BlindProfileError as exc:
        _fail(exc)
    if listen is not None:
        from .dealersvc import DealerService

        stock = {}
        for k, (alice, bob) in enumerate(pairs):
            stock[(Party.ALICE, k)] = alice
            stock[(Party.BOB, k)] = bob
        click.echo(f"serving {len(stock)} bundle halves on port {listen}", err=True)
        DealerService(stock, port=listen).serve()


@main.command("serve")
@click.option("--bank", "bank_dir", required=True, help="Model bank directory.")
@click.option("--bundle", "bundles", multiple=True, help="Bob-side bundle file (repeatable).")
@click.option("--port", type=int, default=7311, show_default=True)
@click.option("--ell", type=int, default=64, show_default=True)
@click.option("--frac-bits", type=int, default=16, show_default=True)
@click.option("--variant", type=click.Choice(VARIANTS), default=BASIC, show_default=True)
@click.option("--dealer", default=None, help="host:port of a dealer service to fetch from.")
@click.option("--pairs", type=int, default=1, show_default=True, help="Pair ids to fetch from the dealer.")
def serve_cmd(bank_dir, bundles, port, ell, frac_bits, variant, dealer, pairs):
    """Serve profile sessions (party Bob)."""
    from .server import ProfileServer, ServerConfig

    paths = []
    for b in bundles:
        paths.extend(p.strip() for p in b.split(",") if p.strip())
    try:
        server = ProfileServer(
            ServerConfig(
                bank_dir=bank_dir,
                bundle_paths=paths,
                port=port,
                ell=ell,
                frac_bits=frac_bits,
                variant=variant,
            )
        )
        if dealer is not None:
            host, _, dport = dealer.partition(":")
            server.fetch_bundles_from_dealer(host, int(dport), list(range(pairs)))
    except BlindProfileError as exc:
        _fail(exc)
    server.serve()


def _print_profile(result, heading: str) -> None:
    click.echo(f"{heading}")
    click.echo(f"  gender: {result.gender}")
    click.echo(f"  age bracket: {result.age.value}")
    for trait, present in result.trait_map().items():
        click.echo(f"  {trait}: {'yes' if present else 'no'}")


@main.command("client")
@click.option("--server", "server_addr", default="127.0.0.1:7311", show_default=True)
@click.option("--text", "text_path", default=None, help="Text file to profile.")
@click.option("--text-inline", default=None, help="Literal text instead of a file.")
@click.option("--landmarks", "landmarks_path", required=True)
@click.option("--mode", type=click.Choice(["clear", "private", "compare"]), default="compare", show_default=True)
@click.option("--bundle", "bundle_path", default=None, help="Alice-side bundle file.")
@click.option("--mrc", "mrc_path", required=True, help="MRC lexicon (word + 14 columns).")
@click.option("--nrc", "nrc_path", required=True, help="NRC lexicon (word/category/flag).")
@click.option("--ell", type=int, default=64, show_default=True)
@click.option("--frac-bits", type=int, default=16, show_default=True)
@click.option("--variant", type=click.Choice(VARIANTS), default=BASIC, show_default=True)
@click.option("--dealer", default=None, help="host:port of a dealer service.")
@click.option("--pair", type=int, default=0, show_default=True, help="Bundle pair id at the dealer.")
def client_cmd(
    server_addr, text_path, text_inline, landmarks_path, mode, bundle_path,
    mrc_path, nrc_path, ell, frac_bits, variant, dealer, pair,
):
    """Profile your inputs against the server's models (party Alice)."""
    from .client import ProfileClient, extract_inputs
    from .transport import MODE_CLEAR, MODE_COMPARE, MODE_PRIVATE

    mode_id = {"clear": MODE_CLEAR, "private": MODE_PRIVATE, "compare": MODE_COMPARE}[mode]
    if (text_path is None) == (text_inline is None):
        click.echo("error: give exactly one of --text or --text-inline", err=True)
        sys.exit(EXIT_CONFIG)
    if mode_id != MODE_CLEAR and bundle_path is None and dealer is None:
        click.echo("error: private/compare mode needs --bundle or --dealer", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        if text_path is not None:
            with open(text_path, encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = text_inline
        landmarks, text_vec = extract_inputs(text, landmarks_path, mrc_path, nrc_path)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except BlindProfileError as exc:
        _fail(exc)
    try:
        client = ProfileClient(
            mode=mode_id, ell=ell, frac_bits=frac_bits, variant=variant,
            bundle_path=bundle_path,
        )
        if dealer is not None and mode_id != MODE_CLEAR and bundle_path is None:
            host, _, dport = dealer.partition(":")
            client.fetch_bundle_from_dealer(host, int(dport), pair)
        host, _, port = server_addr.partition(":")
        outcome = client.run_tcp(host, int(port or 7311), landmarks, text_vec)
    except BlindProfileError as exc:
        _fail(exc)
    if outcome.clear is not None:
        _print_profile(outcome.clear, f"clear result ({outcome.clear_seconds:.3f}s):")
    if outcome.private is not None:
        _print_profile(outcome.private, f"private result ({outcome.private_seconds:.3f}s):")
    if outcome.clear is not None and outcome.private is not None:
        match = "identical" if outcome.clear == outcome.private else "DIFFERENT"
        click.echo(f"clear and private results are {match}")


@main.command("bench")
@click.option("--runs", type=int, default=20, show_default=True)
@click.option("--ell", "ells", type=int, multiple=True, default=(64,), show_default=True)
@click.option("--variant", type=click.Choice(VARIANTS), default=BASIC, show_default=True)
def bench_cmd(runs, ells, variant):
    """Measure clear vs private latency over loopback; JSON on stdout."""
    from .bench import run_bench

    try:
        report = run_bench(runs, list(ells), variant)
    except BlindProfileError as exc:
        _fail(exc)
    click.echo(json.dumps(report, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
