import os

import pytest

from corpus import CORPUS, RANDOM_CORPUS, corpus_function, corpus_ids, corpus_text, random_text
from expr import kink_nodes, parse, to_text
from polyhedral import stratify
from storage import CORPUS_DIR, load_function


def test_ids_cover_fixed_and_random_members():
    assert corpus_ids()[:len(CORPUS)] == list(CORPUS)
    assert set(RANDOM_CORPUS) <= set(corpus_ids())
    with pytest.raises(KeyError):
        corpus_text("missing")


@pytest.mark.parametrize("fid", sorted(RANDOM_CORPUS))
def test_random_members_are_seeded(fid):
    dim, seed, kinks = RANDOM_CORPUS[fid]
    assert random_text(dim, seed, kinks) == corpus_text(fid)
    f = corpus_function(fid)
    assert f.dim == dim
    assert len(kink_nodes(f)) == kinks


@pytest.mark.parametrize("fid", sorted(CORPUS))
def test_shipped_files_match_corpus(fid):
    with open(os.path.join(CORPUS_DIR, f"{fid}.fn"), encoding="utf-8") as fh:
        shipped = parse(fh.read())
    assert shipped.dim == CORPUS[fid][0]
    assert to_text(shipped) == to_text(corpus_function(fid))


@pytest.mark.parametrize("fid", corpus_ids())
def test_every_member_stratifies(fid):
    strata = stratify(corpus_function(fid))
    assert any(s.dim == strata.dim for s in strata)


def test_alias_names_the_cancelling_function():
    assert corpus_text("paperf") == corpus_text("relucancel")
    name, f = load_function("paperf.fn")
    assert name == "paperf"
    assert to_text(f) == to_text(corpus_function("relucancel"))
