"""iotfence CLI - learn, compile, simulate and explain device policies.

Diagnostics go to stderr; policies, scripts and reports go to files or stdout.

Exit codes:
    0   success / no violations
    1   violations found (simulate)
    2   capture has no traffic for the device
    3   policy cannot be compiled
    64  usage error (bad flags, unreadable or invalid input files)
"""

from __future__ import annotations

import json
import logging
import sys
from ipaddress import IPv4Address
from pathlib import Path

import click
import typer

from iotfence import observability
from iotfence.cli.format import print_check, print_info, print_status, print_summary_table
from iotfence.compiler import compile_policy, emit_dns_forwarder, emit_netfilter
from iotfence.errors import CaptureError, CompileError, EmptyCaptureError, PolicyError
from iotfence.fileio import write_atomic
from iotfence.monitor import replay
from iotfence.policy import explain_policy, load_policy, save_policy, validate_policy
from iotfence.policy.models import DevicePolicy, normalize_mac
from iotfence.settings import CHAINS, Settings, load_settings, parse_aggregate_prefix
from iotfence.synth import DeviceIdentity, SynthOptions, infer_device_ip, synthesize_policy
from iotfence.traffic import extract_dns, read_capture, summarize_capture, track_flows
from iotfence.traffic.records import MICROS, PacketRecord

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_EMPTY_CAPTURE = 2
EXIT_COMPILE_ERROR = 3
EXIT_USAGE = 64

FORMATS = ("netfilter", "dnsforward")

app = typer.Typer(
    help="iotfence - least-privilege network policies for IoT devices",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)


def _settings(ctx: typer.Context) -> Settings:
    return ctx.obj if isinstance(ctx.obj, Settings) else load_settings()


def _fail(message: str, code: int) -> typer.Exit:
    print_status("FAIL", message, err=True)
    return typer.Exit(code=code)


def _load_policy(path: Path) -> DevicePolicy:
    try:
        return load_policy(path)
    except PolicyError as e:
        raise _fail(f"Invalid policy {path}: {e}", EXIT_USAGE) from e
    except OSError as e:
        raise _fail(f"Cannot read policy {path}: {e}", EXIT_USAGE) from e


def _read_packets(path: Path, device_mac: str | None) -> list[PacketRecord]:
    try:
        reader = read_capture(path, device_mac)
        packets = list(reader)
    except CaptureError as e:
        raise _fail(str(e), EXIT_USAGE) from e
    except OSError as e:
        raise _fail(f"Cannot read capture {path}: {e}", EXIT_USAGE) from e
    logger.info(
        "Read %d packets from %s (skipped %d, filtered %d)", len(packets), path, reader.skipped, reader.filtered
    )
    return packets


def _mac(value: str) -> str:
    try:
        return normalize_mac(value)
    except PolicyError as e:
        raise _fail(f"--device-mac: {e.message}", EXIT_USAGE) from e


def _ip(value: str | None, flag: str) -> IPv4Address | None:
    if value is None:
        return None
    try:
        return IPv4Address(value)
    except ValueError as e:
        raise _fail(f"{flag}: invalid IPv4 address {value!r}", EXIT_USAGE) from e


@app.callback()
def root(
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on stderr"),
    config: Path | None = typer.Option(None, "--config", help="Path to iotfence.yaml (default: discover from cwd)"),
) -> None:
    """Learn, compile, simulate and explain IoT device whitelist policies."""
    try:
        settings = load_settings(config)
    except (ValueError, OSError) as e:
        raise _fail(f"Invalid configuration: {e}", EXIT_USAGE) from e
    observability.configure_logging("DEBUG" if verbose else settings.advanced.log_level)
    observability.configure()
    ctx.obj = settings


# ---------------------------------------------------------------------------
# Learning
# ---------------------------------------------------------------------------


@app.command()
def learn(
    ctx: typer.Context,
    pcap: Path = typer.Option(..., "--pcap", help="Capture of the device's traffic (classic pcap)"),
    device_mac: str = typer.Option(..., "--device-mac", help="MAC address of the device"),
    out: Path = typer.Option(..., "--out", "-o", help="Where to write the policy JSON"),
    device_ip: str | None = typer.Option(None, "--device-ip", help="Device IPv4 (default: inferred from capture)"),
    name: str | None = typer.Option(None, "--name", help="Device name used as the policy's top-level key"),
    aggregate_prefix: str | None = typer.Option(
        None, "--aggregate-prefix", help="'exact' or a prefix length 0-32 for DNS answer ranges"
    ),
    rate_slack: float | None = typer.Option(None, "--rate-slack", help="Multiplier (>= 1) on learned rates"),
) -> None:
    """Learn a policy from a packet capture.

    Example:
        iotfence learn --pcap netatmo.pcap --device-mac 70:ee:50:13:ab:cd --out netatmo.json
    """
    settings = _settings(ctx)
    mac = _mac(device_mac)
    ip = _ip(device_ip, "--device-ip")
    try:
        prefix = parse_aggregate_prefix(aggregate_prefix or settings.learn.aggregate_prefix)
    except ValueError as e:
        raise _fail(f"--aggregate-prefix: {e}", EXIT_USAGE) from e
    slack = settings.learn.rate_slack if rate_slack is None else rate_slack
    if slack < 1:
        raise _fail(f"--rate-slack must be >= 1, got {slack}", EXIT_USAGE)

    with observability.span("iotfence.learn", pcap=str(pcap), device=mac):
        packets = _read_packets(pcap, mac)
        options = SynthOptions(
            device_name=name or pcap.stem,
            aggregate_prefix=prefix,
            rate_slack=slack,
            min_observations=settings.learn.min_rate_observations,
            binding_ttl_floor=settings.monitor.binding_ttl_floor,
            binding_ttl_cap=settings.monitor.binding_ttl_cap,
            capture_duration=(packets[-1].timestamp - packets[0].timestamp) / MICROS if packets else None,
        )
        flows = track_flows(packets, device_mac=mac, udp_idle_timeout=settings.monitor.udp_idle_timeout)
        transactions = extract_dns(packets)
        identity = DeviceIdentity(mac=mac, ip=ip or infer_device_ip(packets, mac))
        try:
            policy = synthesize_policy(flows, transactions, identity, options)
        except EmptyCaptureError as e:
            raise _fail(str(e), EXIT_EMPTY_CAPTURE) from e

    for warning in validate_policy(policy):
        print_status("WARN", f"{warning.rule_id}: {warning.message}", err=True)
    save_policy(policy, out)
    print_status(
        "OK",
        f"Wrote {out}: {len(policy.allowed_dns_queries)} lookups, "
        f"{len(policy.allowed_dns_replies)} reply ranges, {len(policy.allowed_connections)} connections",
        err=True,
    )


# ---------------------------------------------------------------------------
# Enforcement artifacts
# ---------------------------------------------------------------------------


@app.command("compile")
def compile_cmd(
    ctx: typer.Context,
    policy_path: Path = typer.Argument(..., metavar="POLICY", help="Policy JSON file"),
    fmt: str = typer.Option("netfilter", "--format", "-f", help="netfilter or dnsforward"),
    out: Path | None = typer.Option(None, "--out", "-o", help="Output file (default: stdout)"),
    upstream: str | None = typer.Option(None, "--upstream", help="Upstream resolver for dnsforward"),
    chain: str | None = typer.Option(None, "--chain", help="nat-prerouting or filter-forward"),
    interface: str | None = typer.Option(None, "--interface", "-i", help="Inbound interface of the devices"),
    strict: bool = typer.Option(False, "--strict", help="Fail on bounds netfilter cannot enforce"),
) -> None:
    """Compile a policy into an iptables script or a dnsmasq whitelist.

    Example:
        iotfence compile netatmo.json --format netfilter --out netatmo.sh
        iotfence compile netatmo.json --format dnsforward --upstream 8.8.8.8
    """
    settings = _settings(ctx)
    if fmt not in FORMATS:
        raise _fail(f"--format must be one of {', '.join(FORMATS)}, got {fmt!r}", EXIT_USAGE)
    chain = chain or settings.enforcement.chain
    if chain not in CHAINS:
        raise _fail(f"--chain must be one of {', '.join(CHAINS)}, got {chain!r}", EXIT_USAGE)
    resolver = _ip(upstream or settings.enforcement.upstream_resolver, "--upstream")

    policy = _load_policy(policy_path)
    with observability.span("iotfence.compile", policy=str(policy_path), format=fmt):
        try:
            ir = compile_policy(
                policy,
                interface=interface or settings.enforcement.interface,
                sinkhole=IPv4Address(settings.enforcement.sinkhole_address),
            )
            text = emit_netfilter(ir, chain, strict=strict) if fmt == "netfilter" else emit_dns_forwarder(ir, resolver)
        except CompileError as e:
            raise _fail(f"Cannot compile {policy_path}: {e}", EXIT_COMPILE_ERROR) from e

    if out is None:
        typer.echo(text, nl=False)
    else:
        write_atomic(out, text)
        print_status("OK", f"Wrote {out}", err=True)


@app.command()
def simulate(
    ctx: typer.Context,
    policy_path: Path = typer.Option(..., "--policy", help="Policy JSON file"),
    pcap: Path = typer.Option(..., "--pcap", help="Capture to replay"),
    log: Path | None = typer.Option(None, "--log", help="Write per-packet verdicts (NDJSON)"),
    stats: Path | None = typer.Option(None, "--stats", help="Write match statistics (JSON)"),
) -> None:
    """Replay a capture through the reference monitor.

    Exits 1 when any packet is denied, so a learned policy can be checked
    against its own capture in scripts.
    """
    settings = _settings(ctx)
    policy = _load_policy(policy_path)
    with observability.span("iotfence.simulate", policy=str(policy_path), pcap=str(pcap)):
        packets = _read_packets(pcap, policy.mac_addr)
        verdicts, match_stats = replay(policy, packets, settings.monitor)

    if log is not None:
        write_atomic(log, "".join(json.dumps(v.to_dict()) + "\n" for v in verdicts))
    if stats is not None:
        write_atomic(stats, json.dumps(match_stats.to_dict(), indent=2) + "\n")

    summary = f"{match_stats.allowed_total} allowed, {match_stats.denied_total} denied"
    if match_stats.denied_total:
        print_status("WARN", f"{summary}; {len(match_stats.extraneous)} extraneous destinations", err=True)
        raise typer.Exit(code=EXIT_VIOLATIONS)
    print_status("PASS", summary, err=True)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@app.command()
def summarize(
    ctx: typer.Context,
    pcap: Path = typer.Option(..., "--pcap", help="Capture to summarize"),
    device_mac: str | None = typer.Option(None, "--device-mac", help="Only count this device's traffic"),
    dhcp_resolver: str | None = typer.Option(None, "--dhcp-resolver", help="Resolver handed out by DHCP"),
    as_json: bool = typer.Option(False, "--json", help="Print the summary as JSON"),
) -> None:
    """Summarize a device's network footprint (endpoints, domains, hardcoded IPs)."""
    settings = _settings(ctx)
    mac = _mac(device_mac) if device_mac else None
    resolver = _ip(dhcp_resolver, "--dhcp-resolver")
    with observability.span("iotfence.summarize", pcap=str(pcap)):
        packets = _read_packets(pcap, mac)
        flows = track_flows(packets, device_mac=mac, udp_idle_timeout=settings.monitor.udp_idle_timeout)
        summary = summarize_capture(flows, extract_dns(packets), resolver)

    if as_json:
        typer.echo(json.dumps(summary.to_dict()))
    else:
        print_summary_table([(mac or pcap.name, summary)])


@app.command()
def explain(
    policy_path: Path = typer.Argument(..., metavar="POLICY", help="Policy JSON file"),
    subject: str = typer.Option("This device", "--subject", help="How to refer to the device"),
) -> None:
    """Explain a policy in plain English, one sentence per rule."""
    typer.echo(explain_policy(_load_policy(policy_path), subject=subject))


@app.command()
def validate(
    policy_path: Path = typer.Argument(..., metavar="POLICY", help="Policy JSON file"),
) -> None:
    """Check a policy for gaps an attacker could abuse (warnings only)."""
    policy = _load_policy(policy_path)
    warnings = validate_policy(policy)
    for warning in warnings:
        print_check(warning)
    if warnings:
        print_info(f"{len(warnings)} warnings")
    else:
        print_status("PASS", f"{policy.device_name}: no warnings")


def main(argv: list[str] | None = None) -> None:
    """Console entry point; maps usage errors to exit code 64."""
    try:
        code = app(args=argv, standalone_mode=False)
    except click.UsageError as e:
        e.show()
        sys.exit(EXIT_USAGE)
    except click.Abort:
        sys.exit(130)
    sys.exit(code or EXIT_OK)


if __name__ == "__main__":
    main()
