import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoword.corpus import Document
from geoword.gazetteer import gazetteer_hits, load_gazetteer, load_stoplist
from geoword.geo import GeoPoint


def write_gaz(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def gaz_file(tmp_path):
    return write_gaz(tmp_path / "gaz.tsv", [
        "falköping\t58.17\t13.55",
        "stockholm\t59.33\t18.07\t1",
        "umeå\t63.83\t20.26",
        "när\t57.44\t18.63",
    ])


class TestLoadGazetteer:
    def test_entry_present(self, gaz_file):
        gaz = load_gazetteer(gaz_file)
        assert gaz["falköping"].location == GeoPoint(58.17, 13.55)
        assert gaz["stockholm"].population_rank == 1

    def test_stoplisted_name_absent(self, gaz_file, tmp_path):
        stop = tmp_path / "stop.txt"
        stop.write_text("# homographs of common words\nnär\n", encoding="utf-8")
        gaz = load_gazetteer(gaz_file, load_stoplist(stop))
        assert "när" not in gaz
        assert "falköping" in gaz

    def test_duplicate_keeps_first(self, tmp_path):
        f = write_gaz(tmp_path / "gaz.tsv", [
            "orten\t58.0\t13.0",
            "orten\t60.0\t15.0",
        ])
        gaz = load_gazetteer(f)
        assert gaz["orten"].location == GeoPoint(58.0, 13.0)

    def test_names_are_lowercased(self, tmp_path):
        f = write_gaz(tmp_path / "gaz.tsv", ["Umeå\t63.83\t20.26"])
        assert "umeå" in load_gazetteer(f)

    def test_multiword_name_dropped(self, tmp_path):
        f = write_gaz(tmp_path / "gaz.tsv", [
            "upplands väsby\t59.52\t17.91",
            "sala\t59.92\t16.60",
        ])
        gaz = load_gazetteer(f)
        assert list(gaz) == ["sala"]

    def test_malformed_line_skipped(self, tmp_path):
        f = write_gaz(tmp_path / "gaz.tsv", [
            "bra\t58.0\t13.0",
            "trasig\tinte-en-lat\t13.0",
            "kort",
        ])
        gaz = load_gazetteer(f)
        assert list(gaz) == ["bra"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_gazetteer(tmp_path / "saknas.tsv")


class TestGazetteerHits:
    def test_counts(self, gaz_file):
        gaz = load_gazetteer(gaz_file)
        doc = Document(id="d", tokens=("bor", "i", "falköping", "falköping"))
        hits = gazetteer_hits(doc, gaz)
        assert hits == {"falköping": (GeoPoint(58.17, 13.55), 2)}

    def test_no_matches(self, gaz_file):
        gaz = load_gazetteer(gaz_file)
        assert gazetteer_hits(Document(id="d", tokens=("hej", "du")), gaz) == {}

    @given(st.lists(st.sampled_from(["falköping", "stockholm", "umeå", "träd", "hus", "väg"]),
                    max_size=40))
    @settings(max_examples=100)
    def test_counts_match_bruteforce(self, tokens):
        from geoword.gazetteer import GazetteerEntry
        gaz = {
            "falköping": GazetteerEntry("falköping", GeoPoint(58.17, 13.55)),
            "stockholm": GazetteerEntry("stockholm", GeoPoint(59.33, 18.07)),
            "umeå": GazetteerEntry("umeå", GeoPoint(63.83, 20.26)),
        }
        hits = gazetteer_hits(Document(id="d", tokens=tuple(tokens)), gaz)
        for tok, (loc, n) in hits.items():
            assert tok in gaz
            assert n == tokens.count(tok)
            assert loc == gaz[tok].location
        assert sum(n for _, n in hits.values()) <= len(tokens)
        for tok in set(tokens) & set(gaz):
            assert tok in hits
