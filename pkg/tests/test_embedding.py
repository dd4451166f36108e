import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hesitancy.embedding import (
    Representation,
    VectorTable,
    embed_tweet,
    load_vectors,
    select_tokens,
)
from hesitancy.errors import ConfigError
from hesitancy.textprep import Token, normalize, tokenize


def tok(text, tag=False):
    return Token(text, tag)


def table_of(entries, dim):
    return VectorTable(dim=dim, vectors={k: np.asarray(v, dtype=float) for k, v in entries.items()})


class TestLoadVectors:
    def test_small_file_with_dim_override(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 3\nfoo 1 2 3\nbar 0.5 -1 2\n")
        table = load_vectors(path, expected_dim=3)
        assert table.dim == 3 and len(table) == 2
        assert np.allclose(table.get("bar"), [0.5, -1.0, 2.0])

    def test_rows_win_over_header_count(self, tmp_path, caplog):
        path = tmp_path / "v.txt"
        path.write_text("5 3\na 1 2 3\nb 1 2 3\nc 1 2 3\nd 1 2 3\n")
        table = load_vectors(path, expected_dim=3)
        assert len(table) == 4

    def test_duplicate_token_last_wins(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 2\nfoo 1 1\nfoo 2 2\n")
        table = load_vectors(path, expected_dim=2)
        assert table.n_duplicates == 1
        assert np.allclose(table.get("foo"), [2.0, 2.0])

    def test_dim_mismatch_fatal(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("1 3\nfoo 1 2 3\n")
        with pytest.raises(ConfigError):
            load_vectors(path, expected_dim=300)

    def test_headerless_file(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("foo 1 2 3\nbar 4 5 6\n")
        table = load_vectors(path, expected_dim=3)
        assert len(table) == 2

    def test_malformed_lines_skipped(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("3 2\nok 1 2\nbad 1\nworse x y\n")
        table = load_vectors(path, expected_dim=2)
        assert len(table) == 1
        assert table.n_malformed == 2

    def test_missing_file_fatal(self, tmp_path):
        with pytest.raises(ConfigError):
            load_vectors(tmp_path / "nope.txt", expected_dim=2)


class TestSelectTokens:
    # The example tweet with both text and hashtag tokens.
    TOKENS = normalize(tokenize("Be back soon my friends #corona #cov19 #notMyVirus"))

    def test_text_only_excludes_hashtags(self):
        out = select_tokens(self.TOKENS, Representation.TEXT_ONLY)
        assert [t.text for t in out] == ["back", "soon", "friend"]
        assert all(not t.is_hashtag for t in out)

    def test_text_and_hashtags_is_identity(self):
        assert select_tokens(self.TOKENS, Representation.TEXT_AND_HASHTAGS) == list(self.TOKENS)

    def test_hybrid_prefers_hashtags(self):
        out = select_tokens(self.TOKENS, Representation.HYBRID)
        assert [t.text for t in out] == ["corona", "cov", "notmyvirus"]

    def test_hybrid_falls_back_to_text(self):
        toks = normalize(tokenize("In the hospital not for Corona virus"))
        out = select_tokens(toks, Representation.HYBRID)
        assert out == select_tokens(toks, Representation.TEXT_ONLY)
        assert [t.text for t in out] == ["hospital", "not", "corona", "virus"]


class TestEmbedTweet:
    def test_single_in_vocab_token_is_its_vector(self):
        table = table_of({"covid": [1.0, -2.0, 0.5]}, 3)
        emb = embed_tweet([tok("covid")], table)
        assert np.array_equal(emb.vector, [1.0, -2.0, 0.5])
        assert emb.n_tokens_used == 1 and not emb.is_empty

    def test_opposite_vectors_cancel_but_not_empty(self):
        table = table_of({"a": [1.0, 2.0], "b": [-1.0, -2.0]}, 2)
        emb = embed_tweet([tok("a"), tok("b")], table)
        assert np.array_equal(emb.vector, [0.0, 0.0])
        assert emb.n_tokens_used == 2
        assert not emb.is_empty

    def test_all_out_of_vocab_is_empty(self):
        table = table_of({"covid": [1.0]}, 1)
        emb = embed_tweet([tok("zzz"), tok("qqq")], table)
        assert emb.is_empty
        assert np.array_equal(emb.vector, [0.0])

    def test_repeated_token_counts_multiply(self):
        table = table_of({"a": [3.0], "b": [0.0]}, 1)
        emb = embed_tweet([tok("a"), tok("a"), tok("b")], table)
        assert emb.n_tokens_used == 3
        assert np.allclose(emb.vector, [2.0])

    def test_oov_skipped_in_mean(self):
        table = table_of({"a": [2.0], "b": [4.0]}, 1)
        emb = embed_tweet([tok("a"), tok("zzz"), tok("b")], table)
        assert emb.n_tokens_used == 2
        assert np.allclose(emb.vector, [3.0])


vectors3 = st.lists(
    st.floats(min_value=-5, max_value=5, allow_nan=False), min_size=3, max_size=3
)


class TestProperties:
    @given(st.lists(st.sampled_from(["aa", "bb", "cc", "zz"]), max_size=8), st.randoms())
    @settings(max_examples=100, deadline=None)
    def test_permutation_invariance(self, words, rnd):
        table = table_of({"aa": [1, 0, 2], "bb": [0, -1, 1], "cc": [3, 3, 3]}, 3)
        toks = [tok(w) for w in words]
        shuffled = list(toks)
        rnd.shuffle(shuffled)
        a = embed_tweet(toks, table)
        b = embed_tweet(shuffled, table)
        assert np.allclose(a.vector, b.vector, atol=1e-12)
        assert a.n_tokens_used == b.n_tokens_used

    @given(st.lists(st.tuples(st.sampled_from(["aa", "bb", "cc"]), st.booleans()), min_size=1, max_size=10))
    @settings(max_examples=100, deadline=None)
    def test_coordinates_within_contributor_bounds(self, items):
        table = table_of({"aa": [1, 0, 2], "bb": [0, -1, 1], "cc": [3, 3, 3]}, 3)
        toks = [tok(w, tag) for w, tag in items]
        emb = embed_tweet(toks, table)
        used = [table.get(t.text) for t in toks if table.get(t.text) is not None]
        if not used:
            assert emb.is_empty
            return
        mat = np.stack(used)
        assert np.all(emb.vector >= mat.min(axis=0) - 1e-12)
        assert np.all(emb.vector <= mat.max(axis=0) + 1e-12)

    @given(st.lists(st.tuples(st.sampled_from(["aa", "bb"]), st.booleans()), max_size=8))
    @settings(max_examples=100, deadline=None)
    def test_hybrid_consistency(self, items):
        toks = [tok(w, tag) for w, tag in items]
        hybrid = select_tokens(toks, Representation.HYBRID)
        if any(t.is_hashtag for t in toks):
            assert hybrid == [t for t in toks if t.is_hashtag]
        else:
            assert hybrid == select_tokens(toks, Representation.TEXT_ONLY)
