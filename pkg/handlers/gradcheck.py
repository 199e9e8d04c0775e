import click

router = click.Group()


@router.command("gradcheck")
@click.option("--seed", type=int, default=0, show_default=True)
def gradcheck(seed: int) -> None:
    """Compare reverse-mode gradients of every loss term with central differences on a micro scene."""
    from controllers.gradcheck import run_gradcheck
    from diffengine import GradientMismatch

    results = run_gradcheck(seed)
    for result in results:
        click.echo(result.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise GradientMismatch(f"gradient check failed for {', '.join(failed)}")
