import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoword.corpus import (
    CorpusFormatError,
    IngestStats,
    Post,
    occurrences,
    read_documents,
    read_geotagged,
    read_labeled_documents,
    tokenize,
)
from geoword.geo import GeoPoint


class TestTokenize:
    def test_strips_edge_punctuation(self):
        assert tokenize("Bor i Falköping!") == ["bor", "i", "falköping"]

    def test_keeps_hash_prefix(self):
        assert tokenize("#lundakarneval är kul") == ["#lundakarneval", "är", "kul"]

    def test_keeps_at_prefix(self):
        assert tokenize("hej @anna_92!") == ["hej", "@anna_92"]

    def test_whitespace_only(self):
        assert tokenize("  ") == []

    def test_internal_hyphen_kept(self):
        # internal hyphens survive; an edge hyphen is punctuation and goes
        assert tokenize("t-bana") == ["t-bana"]
        assert tokenize("fisk- och skaldjur") == ["fisk", "och", "skaldjur"]

    def test_bare_punctuation_dropped(self):
        assert tokenize("! ?? # @ --") == []

    def test_quotes_and_parens(self):
        assert tokenize('"Umeå" (norrland)...') == ["umeå", "norrland"]

    @given(st.text(max_size=80))
    @settings(max_examples=300)
    def test_idempotent(self, text):
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once

    @given(st.text(max_size=80))
    def test_no_empty_and_lowercase(self, text):
        for tok in tokenize(text):
            assert tok
            assert tok == tok.lower()


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestReadGeotagged:
    def test_well_formed(self, tmp_path):
        f = tmp_path / "posts.tsv"
        write_lines(f, [
            "p1\t59.35\t18.11\tbor i stockholm",
            "p2\t57.70\t11.97\thej göteborg",
            "p3\t55.60\t13.00\tmalmö ikväll",
        ])
        posts = list(read_geotagged(f))
        assert len(posts) == 3
        assert posts[0].id == "p1"
        assert posts[0].location == GeoPoint(59.35, 18.11)

    def test_bad_latitude_skipped_and_counted(self, tmp_path):
        f = tmp_path / "posts.tsv"
        write_lines(f, [
            "p1\t91\t18.11\tomöjlig plats",
            "p2\t57.70\t11.97\thej göteborg",
            "p3\t59.35\t18.11\tstockholm igen",
        ])
        stats = IngestStats()
        posts = list(read_geotagged(f, stats))
        assert [p.id for p in posts] == ["p2", "p3"]
        assert stats.skipped == 1
        assert stats.reasons == {"bad-coordinates": 1}

    def test_empty_file_is_empty_stream(self, tmp_path):
        f = tmp_path / "posts.tsv"
        f.write_text("", encoding="utf-8")
        assert list(read_geotagged(f)) == []

    def test_comment_lines_ignored(self, tmp_path):
        f = tmp_path / "posts.tsv"
        write_lines(f, ["# a comment", "p1\t59.35\t18.11\thej"])
        assert len(list(read_geotagged(f))) == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusFormatError):
            list(read_geotagged(tmp_path / "nope.tsv"))

    def test_mostly_malformed_aborts(self, tmp_path):
        f = tmp_path / "posts.tsv"
        write_lines(f, [
            "p1\tnot-a-lat\t18.11\ttrasig",
            "p2\tbroken",
            "p3\t57.70\t11.97\tok",
        ])
        with pytest.raises(CorpusFormatError, match="malformed"):
            list(read_geotagged(f))

    def test_text_may_contain_tabs(self, tmp_path):
        f = tmp_path / "posts.tsv"
        write_lines(f, ["p1\t59.35\t18.11\tdel ett\tdel två"])
        posts = list(read_geotagged(f))
        assert posts[0].text == "del ett\tdel två"


class TestReadDocuments:
    def test_untagged(self, tmp_path):
        f = tmp_path / "docs.tsv"
        write_lines(f, ["d1\tBor i Umeå", "d2\tkaffe och bulle"])
        docs = list(read_documents(f))
        assert docs[0].tokens == ("bor", "i", "umeå")
        assert docs[0].gold_location is None

    def test_labeled(self, tmp_path):
        f = tmp_path / "docs.tsv"
        write_lines(f, ["d1\t63.83\t20.26\tbor i Umeå"])
        docs = list(read_labeled_documents(f))
        assert docs[0].gold_location == GeoPoint(63.83, 20.26)
        assert docs[0].tokens == ("bor", "i", "umeå")


class TestOccurrences:
    def post(self, text, loc=GeoPoint(59.35, 18.11), pid="p"):
        return Post(id=pid, text=text, location=loc)

    def test_per_instance_semantics(self):
        occs = list(occurrences([self.post("a b a")]))
        assert [(o.token, o.post_id) for o in occs] == [("a", "p"), ("b", "p"), ("a", "p")]

    def test_unlocated_post_contributes_nothing(self):
        p = Post(id="x", text="hej du", location=None)
        assert list(occurrences([p])) == []

    def test_streams_concatenate(self):
        p1 = self.post("aa bb", pid="p1")
        p2 = self.post("cc", GeoPoint(57.7, 11.97), pid="p2")
        occs = list(occurrences([p1, p2]))
        assert [o.token for o in occs] == ["aa", "bb", "cc"]
        assert occs[2].location == GeoPoint(57.7, 11.97)

    @given(st.lists(st.text(alphabet="abcx ", max_size=30), max_size=8))
    @settings(max_examples=100)
    def test_counts_match_bruteforce(self, texts):
        posts = []
        for i, text in enumerate(texts):
            if text.strip():
                posts.append(Post(id=f"p{i}", text=text, location=GeoPoint(50 + i * 0.01, 10)))
        occs = list(occurrences(posts))
        from geoword.corpus import tokenize as tk
        expected = sum(len(tk(p.text)) for p in posts)
        assert len(occs) == expected
        for word in {o.token for o in occs}:
            brute = sum(tk(p.text).count(word) for p in posts)
            assert sum(1 for o in occs if o.token == word) == brute
