from invoke import task

SOURCE = "docs/source"
BUILD = "docs/build"


def sphinx(c, builder, *options):
    c.run(f"sphinx-build -b {builder} {' '.join(options)} {SOURCE} {BUILD}/{builder}")


@task
def clean(c):
    """Remove built docs"""
    c.run(f"rm -fr {BUILD}/")


@task(clean)
def build(c, strict=False):
    """Clean up and build the html docs [failing on warnings]"""
    sphinx(c, "html", "-W --keep-going" if strict else "")


@task
def linkcheck(c):
    """Check external links in the docs"""
    sphinx(c, "linkcheck")


@task(build)
def release(c):
    """Push docs to GitHub, triggering webhook to build Read The Docs"""
    c.run("git push")
