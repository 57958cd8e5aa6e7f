import pytest

from scmoa.fixtures import TOY_QA, TOY_QA_FIXTURES, TOY_QA_MANIFEST, path
from scmoa.fixtures.builder import build


@pytest.fixture(scope="module")
def rebuilt(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    build(out)
    return out


@pytest.mark.parametrize("name", [TOY_QA, TOY_QA_FIXTURES, TOY_QA_MANIFEST])
def test_bundled_files_regenerate_byte_for_byte(rebuilt, name):
    assert (rebuilt / name).read_bytes() == path(name).read_bytes()


def test_manifest_headline(toy_manifest):
    assert toy_manifest["majority_vote_accuracy"] == 0.6
    assert toy_manifest["scmoa_accuracy"] == 0.8
    assert toy_manifest["margin"] == 0.2
    assert toy_manifest["minority_recoverable"] == ["toy-07", "toy-08"]
    assert toy_manifest["fixture_count"] == 137
