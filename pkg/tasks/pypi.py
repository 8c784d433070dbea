from invoke import task

from . import clean as clean_task
from . import docs as docs_task


@task
def clean(c):
    """Remove previous distributions"""
    c.run("rm -fr ./dist/*")


@task(pre=[clean], post=[clean_task.clean_all])
def build(c, docs=False):
    """Build sdist and wheel [and docs]; the wheel must carry the grammar file"""
    c.run("python -m build")
    c.run("unzip -l dist/*.whl | grep -q 'gasrepair/lang/minisol.lark'")
    if docs:
        docs_task.build(c)


@task
def get_version(c):
    """Show the current version using bumpver"""
    c.run("bumpver show --no-fetch")


@task
def check(c):
    """Twine check every distribution under dist/"""
    c.run("twine check dist/*")


@task(help={"repo": "pypi for a production release", "api-token": "PyPI API token"})
def upload(c, api_token, repo="testpypi"):
    """Upload the distributions to the given PyPI repo"""
    c.run(f"twine upload --repository {repo} -u __token__ -p {api_token} dist/*")


@task(
    help={
        "repo": "pypi for a production release",
        "api-token": "Overrides config.pypi.<repo>.api_token",
        "yes": "Skip the confirmation prompt",
    }
)
def release(c, repo="testpypi", api_token=None, yes=False):
    """Run the tests, build, check and upload a release"""
    api_token = api_token or c.config.pypi[repo].api_token
    get_version(c)
    if not yes and input("Continue? (y/n): ").lower()[:1] != "y":
        print("Release aborted.")
        return
    c.run("pytest -q")
    build(c)
    check(c)
    print(f"Uploading release to {repo}...")
    upload(c, api_token, repo)
    print("Released.")
