"""Command-line entry point: provider, device agent, clone agent, simulator.

Exit codes: 0 success / gate allows, 1 operational failure or gate
denies, 2 usage error. With --json the only thing on stdout is one JSON
document, so the gate commands can back a launcher script directly.
"""

from __future__ import annotations

import json
import logging
import sys

import click

from . import harness, reporting
from .agents import clone_activate, clone_gate, device_first_run, device_gate, state_load
from .authority import LicenseAuthority
from .client import HttpAuthorityClient
from .errors import PiraxError
from .identity import ApplicationId, LicenseType, parse_imei, parse_uuid
from .keyfiles import (
    load_channel_key,
    load_keys,
    resolve_keys_path,
    save_channel_key,
    save_keys,
)
from .ledger import Ledger
from .serials import KeyMaterial
from .service import ProviderServer, parse_listen_address

_TYPE_CHOICES = {
    "phone": LicenseType.SMARTPHONE_ONLY,
    "phone+cloud": LicenseType.SMARTPHONE_AND_CLOUD,
}


def _fail(err: PiraxError) -> "click.exceptions.Exit":
    click.echo(f"error: {err.code}: {err.message}", err=True)
    return click.exceptions.Exit(1)


def _load_agent_keys(keys_path: str | None, app_hex: str | None):
    app_id, keys = load_keys(resolve_keys_path(keys_path))
    if app_hex is not None:
        requested = ApplicationId.from_hex(app_hex)
        if requested != app_id:
            raise PiraxError(f"--app {app_hex} does not match key file app {app_id.hex}")
        app_id = requested
    return app_id, keys


def _channel(channel_key_path: str | None) -> bytes | None:
    return load_channel_key(channel_key_path) if channel_key_path else None


@click.group()
def main():
    """License authority, runtime gates, and threat-scenario simulator."""


# --- keygen -----------------------------------------------------------------


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Directory for keys.json and channel.json.")
@click.option("--app", "app_hex", default=None, help="Fix the application id (32 hex chars).")
def keygen(out, app_hex):
    """Generate per-application codec keys and a channel key."""
    import pathlib

    out_dir = pathlib.Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        app_id = ApplicationId.from_hex(app_hex) if app_hex else ApplicationId.generate()
    except PiraxError as err:
        raise _fail(err)
    save_keys(out_dir / "keys.json", app_id, KeyMaterial.generate())
    save_channel_key(out_dir / "channel.json")
    click.echo(f"wrote {out_dir / 'keys.json'} (app {app_id.hex})")
    click.echo(f"wrote {out_dir / 'channel.json'}")


# --- provider ----------------------------------------------------------------


@main.group()
def provider():
    """License authority commands."""


@provider.command()
@click.option("--listen", default="127.0.0.1:8870", show_default=True, help="HOST:PORT.")
@click.option("--ledger", "ledger_path", required=True, type=click.Path(dir_okay=False))
@click.option("--keys", "keys_path", default=None, help="Key file (or PIRAX_KEYS).")
@click.option("--envelope", is_flag=True, help="Require the encryption envelope on all bodies.")
@click.option("--channel-key", "channel_key_path", default=None,
              help="Channel key file (required with --envelope).")
@click.option("--verbose", is_flag=True, help="Log every request.")
def serve(listen, ledger_path, keys_path, envelope, channel_key_path, verbose):
    """Run the license authority service."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        app_id, keys = _load_agent_keys(keys_path, None)
        if envelope and not channel_key_path:
            raise PiraxError("--envelope requires --channel-key")
        channel_key = _channel(channel_key_path) if envelope else None
        authority = LicenseAuthority({app_id.hex: keys}, Ledger.load(ledger_path))
        server = ProviderServer(parse_listen_address(listen), authority, channel_key)
    except PiraxError as err:
        raise _fail(err)
    click.echo(f"serving application {app_id.hex} on {server.url} "
               f"(ledger={ledger_path}, envelope={'on' if envelope else 'off'})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


@provider.command()
@click.option("--app", "app_hex", required=True, help="Application id (32 hex chars).")
@click.option("--purchase", required=True, help="Purchase token (32 hex chars).")
@click.option("--type", "license_type", required=True,
              type=click.Choice(sorted(_TYPE_CHOICES)), help="License type.")
@click.option("--authority", default="http://127.0.0.1:8870", show_default=True)
@click.option("--channel-key", "channel_key_path", default=None)
def entitle(app_hex, purchase, license_type, authority, channel_key_path):
    """Register a purchase with a running authority."""
    try:
        client = HttpAuthorityClient(authority, _channel(channel_key_path))
        client.register_entitlement(
            ApplicationId.from_hex(app_hex), bytes.fromhex(purchase),
            _TYPE_CHOICES[license_type],
        )
    except ValueError:
        raise _fail(PiraxError("purchase token must be hex"))
    except PiraxError as err:
        raise _fail(err)
    click.echo("entitlement registered")


# --- device agent ---------------------------------------------------------------


@main.group()
def device():
    """Smartphone-side agent commands."""


@device.command("activate")
@click.option("--imei", required=True)
@click.option("--app", "app_hex", default=None)
@click.option("--purchase", required=True, help="Purchase token (32 hex chars).")
@click.option("--state", "state_path", required=True, type=click.Path(dir_okay=False))
@click.option("--authority", required=True)
@click.option("--keys", "keys_path", default=None)
@click.option("--channel-key", "channel_key_path", default=None)
def device_activate_cmd(imei, app_hex, purchase, state_path, authority, keys_path,
                        channel_key_path):
    """First-run activation against the authority."""
    try:
        dev = parse_imei(imei)
        app_id, keys = _load_agent_keys(keys_path, app_hex)
        client = HttpAuthorityClient(authority, _channel(channel_key_path))
        state = device_first_run(dev, app_id, bytes.fromhex(purchase), client, keys, state_path)
    except ValueError:
        raise _fail(PiraxError("purchase token must be hex"))
    except PiraxError as err:
        raise _fail(err)
    click.echo(f"activated; state stored at {state_path} (at {state.activated_at})")


@device.command("run")
@click.option("--imei", required=True)
@click.option("--state", "state_path", required=True, type=click.Path(dir_okay=False))
@click.option("--keys", "keys_path", default=None)
@click.option("--json", "as_json", is_flag=True, help="Emit one JSON document on stdout.")
def device_run_cmd(imei, state_path, keys_path, as_json):
    """Execution gate: prints Allow or Deny(reason); exit code follows the verdict."""
    try:
        dev = parse_imei(imei)
        app_id, keys = _load_agent_keys(keys_path, None)
        verdict = device_gate(dev, state_load(state_path, app_id), keys)
    except PiraxError as err:
        raise _fail(err)
    _emit_verdict(verdict, as_json)


# --- clone agent -------------------------------------------------------------------


@main.group()
def cloud():
    """Clone-side agent commands."""


@cloud.command("activate")
@click.option("--uuid", "uuid_text", required=True)
@click.option("--state", "state_path", required=True, type=click.Path(dir_okay=False))
@click.option("--authority", required=True)
@click.option("--keys", "keys_path", default=None)
@click.option("--channel-key", "channel_key_path", default=None)
def cloud_activate_cmd(uuid_text, state_path, authority, keys_path, channel_key_path):
    """Cloud activation for the clone on this VM."""
    try:
        vm = parse_uuid(uuid_text)
        app_id, keys = _load_agent_keys(keys_path, None)
        client = HttpAuthorityClient(authority, _channel(channel_key_path))
        clone_activate(vm, state_load(state_path, app_id), client, keys, state_path)
    except PiraxError as err:
        raise _fail(err)
    click.echo(f"cloud license stored at {state_path}")


@cloud.command("run")
@click.option("--uuid", "uuid_text", required=True)
@click.option("--state", "state_path", required=True, type=click.Path(dir_okay=False))
@click.option("--keys", "keys_path", default=None)
@click.option("--json", "as_json", is_flag=True)
def cloud_run_cmd(uuid_text, state_path, keys_path, as_json):
    """Execution gate for the clone; exit code follows the verdict."""
    try:
        vm = parse_uuid(uuid_text)
        app_id, keys = _load_agent_keys(keys_path, None)
        verdict = clone_gate(vm, state_load(state_path, app_id), keys)
    except PiraxError as err:
        raise _fail(err)
    _emit_verdict(verdict, as_json)


def _emit_verdict(verdict, as_json: bool) -> None:
    if as_json:
        doc = {"verdict": str(verdict), "allowed": verdict.allowed,
               "reason": verdict.reason.value if verdict.reason else None}
        click.echo(json.dumps(doc, sort_keys=True))
    else:
        click.echo(str(verdict))
    if not verdict.allowed:
        raise click.exceptions.Exit(1)


# --- simulator -----------------------------------------------------------------------


@main.group()
def sim():
    """Threat-model scenario simulator."""


@sim.command("run")
@click.option("--scenario", "name", required=True,
              help="Built-in scenario name, or a path to a scenario JSON file.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--json", "as_json", is_flag=True)
def sim_run_cmd(name, seed, as_json):
    """Replay one scenario; exit 0 iff observed matches expected."""
    try:
        if name in harness.CATALOG_ORDER:
            scenario = harness.load_builtin(name)
        elif name.endswith(".json"):
            scenario = harness.load_scenario_file(name)
        else:
            scenario = harness.load_builtin(name)  # raises ScenarioMalformed
        report = harness.run_scenario(scenario, seed)
    except PiraxError as err:
        raise _fail(err)
    if as_json:
        click.echo(json.dumps(report.to_json(), sort_keys=True))
    else:
        click.echo(f"{'PASS' if report.passed else 'FAIL'} {report.name} (seed={seed})")
        for i, (step, got, want) in enumerate(
            zip(report.steps, report.observed, report.expected), start=1
        ):
            marker = " " if got == want else "!"
            click.echo(f"  {marker} step {i:2d} {step['op']:<22} {got}"
                       + ("" if got == want else f"  (expected {want})"))
    if not report.passed:
        raise click.exceptions.Exit(1)


@sim.command("all")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--json", "as_json", is_flag=True)
@click.option("--report-dir", default=None, type=click.Path(file_okay=False),
              help="Also write reports.json, summary.csv, and the verdict figure here.")
def sim_all_cmd(seed, as_json, report_dir):
    """Replay the whole built-in catalog; exit 0 iff every scenario passes."""
    try:
        summary = harness.run_all(seed)
    except PiraxError as err:
        raise _fail(err)
    if report_dir:
        for path in reporting.write_report_files(summary, report_dir):
            click.echo(f"wrote {path}", err=True)
    if as_json:
        click.echo(json.dumps(summary, sort_keys=True))
    else:
        for report in summary["reports"]:
            click.echo(f"{'PASS' if report['pass'] else 'FAIL'} {report['name']}")
        click.echo(f"{summary['passed']}/{summary['total']} scenarios passed (seed={seed})")
    if summary["failed"]:
        raise click.exceptions.Exit(1)


if __name__ == "__main__":
    main()
