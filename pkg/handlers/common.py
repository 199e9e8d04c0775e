from pathlib import Path
from typing import Callable, Optional

import click

from config import RunConfig, load_config


def config_options(func: Callable) -> Callable:
    """--config, --preset and --seed, folded into one `config` keyword argument."""
    func = click.option("--seed", type=int, default=None, help="Overrides run.seed.")(func)
    func = click.option("--preset", type=click.Choice(["desk", "paper", "micro"]), default="desk",
                        show_default=True, help="Defaults the config file builds on.")(func)
    func = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                        default=None, help="INI file with [section] key = value overrides.")(func)
    return func


def out_option(default: str) -> Callable:
    return click.option("--out", type=click.Path(path_type=Path), default=default, show_default=True,
                        help="Output location.")


def resolve_config(config_path: Optional[Path], preset: str, seed: Optional[int]) -> RunConfig:
    return load_config(config_path, preset=preset, seed=seed)


def existing(kind: str = "path") -> click.Path:
    return click.Path(exists=True, path_type=Path, dir_okay=kind != "file", file_okay=kind != "dir")


def echo_report(report) -> None:
    for name, value in report.values().items():
        click.echo(f"{name}={value!r}")


def include_router(group: click.Group, router: click.Group) -> None:
    for command in router.commands.values():
        group.add_command(command)
