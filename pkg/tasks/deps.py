from invoke import task

PINS = {
    "core": ("requirements.txt", ()),
    "dev": ("requirements_dev.txt", ("--all-extras",)),
    "docs": ("docs/requirements_docs.txt", ("--extra=docs",)),
}


def pip_compile(c, target, upgrade=False):
    output_file, options = PINS[target]
    flags = " ".join(("--resolver=backtracking", "--upgrade" if upgrade else "", *options))
    c.run(f"pip-compile {flags} -o {output_file} pyproject.toml")


def targets(dev, docs):
    return ["core"] + (["dev"] if dev else []) + (["docs"] if docs else [])


@task
def pin(c, dev=False, docs=False):
    """Pin core [dev and docs] dependencies from pyproject.toml"""
    for target in targets(dev, docs):
        print(f"Pinning {target} requirements...")
        pip_compile(c, target)
    print("Done.")


@task
def upgrade(c, dev=False, docs=False):
    """Upgrade the pins of core [dev and docs] dependencies"""
    for target in targets(dev, docs):
        print(f"Upgrading {target} requirements...")
        pip_compile(c, target, upgrade=True)
    print("Done.")


@task
def install(c, dev=False):
    """Sync the environment to the core [or dev] pins"""
    c.run(f"pip-sync {PINS['dev' if dev else 'core'][0]}")
    c.run("pip install -e . --no-deps")
