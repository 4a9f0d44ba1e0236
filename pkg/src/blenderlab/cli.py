"""Thin command-line client for the certification service.

Commands run against an in-process copy of the FastAPI app by default; pass
--server to target a running instance instead.  Exit code 0 means the
certificate passed overall.
"""

from __future__ import annotations

import asyncio
import json
import sys

import click
import httpx


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _post(server: str | None, route: str, payload: dict) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(route, json=payload)
            resp.raise_for_status()
            return resp.json()

    async def _run():
        from .service.app import app
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://blenderlab",
                                     timeout=None) as client:
            resp = await client.post(route, json=payload)
            resp.raise_for_status()
            return resp.json()

    return asyncio.run(_run())


def _apply_overrides(config: dict, seed, net, max_word_len, budget) -> dict:
    if seed is not None:
        config["seed"] = seed
    if net is not None:
        config["h_base"] = net
    if max_word_len is not None:
        config["max_word_len"] = max_word_len
    if budget is not None:
        config["node_budget"] = budget
    return config


@click.group()
def main():
    """Construction and certification of symplectic one-step systems."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON pipeline configuration (defaults used when omitted).")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the certificate JSON here.")
@click.option("--seed", type=int, default=None)
@click.option("--net", type=float, default=None, help="Base cover net spacing.")
@click.option("--max-word-len", type=int, default=None)
@click.option("--budget", type=int, default=None, help="Search node budget.")
@click.option("--server", type=str, default=None, help="URL of a running service.")
def certify(config_path, out_path, seed, net, max_word_len, budget, server):
    """Run the full certification pipeline; exit 0 iff it passes."""
    config = _apply_overrides(_load_config(config_path), seed, net, max_word_len, budget)
    data = _post(server, "/certify", {"config": config})
    cert = data["certificate"]
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(cert, fh, sort_keys=True, indent=1)
    for check in cert["checks"]:
        margin = check.get("margin")
        tail = f" margin={margin:.6g}" if margin is not None else ""
        click.echo(f"[{check['status']:>7}] {check['name']}{tail}")
    click.echo(f"overall: {'PASS' if data['overall_pass'] else 'FAIL'}")
    sys.exit(0 if data["overall_pass"] else 1)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--eta", "eta_spec", type=str, required=True,
              help="Comma-separated perturbation sizes, e.g. 1e-3,1e-2.")
@click.option("--trials", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--server", type=str, default=None)
def sweep(config_path, eta_spec, trials, out_path, seed, server):
    """Perturbation robustness sweep: re-verify at each eta over seeded trials."""
    config = _apply_overrides(_load_config(config_path), seed, None, None, None)
    eta_list = [float(tok) for tok in eta_spec.split(",") if tok.strip()]
    data = _post(server, "/sweep", {"config": config, "eta_list": eta_list,
                                    "trials": trials})
    table = data["table"]
    for row in table["rows"]:
        click.echo(f"eta={row['eta']:g}: {row['passes']}/{row['trials']} trials pass"
                   + (f" (failing: {', '.join(row['failed_checks'])})"
                      if row["failed_checks"] else ""))
    click.echo(f"largest all-pass eta: {table['largest_all_pass']}")
    click.echo(f"smallest any-fail eta: {table['smallest_any_fail']}")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(table, fh, sort_keys=True, indent=1)


@main.command("audit-realization")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--server", type=str, default=None)
def audit_realization(config_path, out_path, server):
    """Symplecticity defect table for the glued base-times-fiber product map."""
    config = _load_config(config_path)
    data = _post(server, "/audit-realization", {"config": config})
    click.echo(f"max defect: {data['max_defect']:.3e}")
    for row in data["report"]["table"][:12]:
        click.echo(f"  |x|={row['radius']:.3f} defect={row['defect']:.3e}")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(data["report"], fh, sort_keys=True, indent=1)


@main.command()
@click.option("--host", type=str, default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the certification service."""
    import uvicorn

    uvicorn.run("blenderlab.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
