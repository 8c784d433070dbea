from pathlib import Path

from invoke import task

CORPUS = Path(__file__).parent.parent / "corpus"
OUT = Path("build/corpus")


def subjects(name=None):
    """Corpus contracts that come with a recording scenario"""
    names = [name] if name else sorted(p.stem for p in CORPUS.glob("*.msol"))
    return [n for n in names if (CORPUS / f"{n}.scenario.json").exists()]


@task
def detect(c, name=None):
    """Run the detectors over the corpus [or one subject]"""
    for subject in subjects(name):
        print(f"== {subject}")
        c.run(f"gasrepair detect {CORPUS / subject}.msol", warn=True)


@task
def suites(c, name=None):
    """Record every scenario into a regression suite under build/corpus/"""
    OUT.mkdir(parents=True, exist_ok=True)
    for subject in subjects(name):
        contract = CORPUS / f"{subject}.msol"
        scenario = CORPUS / f"{subject}.scenario.json"
        c.run(f"gasrepair testgen {contract} --scenario {scenario} --out {OUT / subject}.jsonl")


@task(pre=[suites])
def repair(c, name=None, seed=7, timeout=600):
    """Deterministic repair of the corpus [or one subject]; reports go to build/corpus/"""
    for subject in subjects(name):
        print(f"== {subject}")
        c.run(
            f"gasrepair repair {CORPUS / subject}.msol --tests {OUT / subject}.jsonl"
            f" --deterministic --seed {seed} --timeout {timeout}"
            f" --out {OUT / subject}.report.json",
            warn=True,
        )
