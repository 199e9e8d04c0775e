import logging
import sys
from typing import List, Optional

import click

from handlers.common import include_router
from handlers.evaluation import router as evaluation_router
from handlers.gradcheck import router as gradcheck_router
from handlers.mesh import router as mesh_router
from handlers.render import router as render_router
from handlers.slam import router as slam_router
from handlers.synth import router as synth_router
from utils.errors import SlamError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

cli = click.Group(name="deskslam", help="Desk-scale neural implicit RGB SLAM with monocular cues.")

include_router(cli, synth_router)
include_router(cli, slam_router)
include_router(cli, mesh_router)
include_router(cli, render_router)
include_router(cli, evaluation_router)
include_router(cli, gradcheck_router)


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        code = cli.main(args=argv, prog_name="deskslam", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("Aborted.", err=True)
        return EXIT_USAGE
    except (SlamError, OSError, ValueError) as exc:
        message = (str(exc).splitlines() or [""])[0]
        click.echo(f"error: {type(exc).__name__}: {message}", err=True)
        return EXIT_RUNTIME
    return code if isinstance(code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
