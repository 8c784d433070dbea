from invoke import Collection

from . import clean, corpus, deps, docs, pypi

namespace = Collection(clean, corpus, deps, docs, pypi)
