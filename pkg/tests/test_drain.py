"""Template mining: similarity, routing, merging, masking, overflow."""

import pytest

from flog.drain import (
    WILDCARD,
    DrainParser,
    ParserConfig,
    preprocess_line,
    seq_similarity,
    write_template_table,
)


class TestSeqSimilarity:
    def test_identity_is_one(self):
        toks = ["a", "b", "c", "d", "e"]
        assert seq_similarity(toks, toks) == 1.0

    def test_half_match(self):
        assert seq_similarity(["x", "y"], ["x", "z"]) == 0.5

    def test_wildcard_matches_anything(self):
        assert seq_similarity(["x", "y"], ["x", WILDCARD]) == 1.0

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError):
            seq_similarity(["a"], ["a", "b"])

    def test_bounds(self):
        import random

        rng = random.Random(0)
        vocab = ["a", "b", "c", WILDCARD]
        for _ in range(200):
            n = rng.randint(1, 8)
            a = [rng.choice(vocab[:3]) for _ in range(n)]
            b = [rng.choice(vocab) for _ in range(n)]
            s = seq_similarity(a, b)
            assert 0.0 <= s <= 1.0
            all_match = all(x == y or y == WILDCARD for x, y in zip(a, b))
            assert (s == 1.0) == all_match


class TestPreprocess:
    def test_digit_tokens_masked(self):
        cfg = ParserConfig()
        toks = preprocess_line("pid 4742 exited status0 ok", cfg)
        assert toks == ["pid", WILDCARD, "exited", WILDCARD, "ok"]

    def test_masking_disabled(self):
        cfg = ParserConfig(mask_numeric_tokens=False)
        assert preprocess_line("pid 4742", cfg) == ["pid", "4742"]


class TestParser:
    def test_session_closed_merge(self):
        p = DrainParser()
        e1 = p.parse_message("session closed for user root")
        e2 = p.parse_message("session closed for user admin")
        assert e1 == e2
        assert p.templates[e1].render() == "session closed for user <*>"

    def test_five_lines_three_templates(self):
        # Two session-close variants, two session-open variants, one check.
        lines = [
            "session closed for user root",
            "session closed for user news",
            "session opened for user cyrus by uid equal zero",
            "session opened for user root by uid equal zero",
            "check pass; user unknown",
        ]
        p = DrainParser()
        for line in lines:
            p.parse_message(line)
        assert len(p.templates) == 3

    def test_identical_lines_same_id(self):
        p = DrainParser()
        a = p.parse_message("alpha beta gamma")
        b = p.parse_message("alpha beta gamma")
        assert a == b
        assert p.templates[a].occurrence_count == 2

    def test_different_lengths_different_ids(self):
        p = DrainParser()
        a = p.parse_message("alpha beta")
        b = p.parse_message("alpha beta gamma")
        assert a != b

    def test_empty_tokens_rejected(self):
        p = DrainParser()
        with pytest.raises(ValueError):
            p.parse_line([])
        assert p.parse_message("   ") is None

    def test_dense_first_seen_ids(self):
        p = DrainParser()
        ids = [p.parse_message(m) for m in ("one fish", "two fish blue", "one fish")]
        assert sorted(p.templates) == list(range(len(p.templates)))
        assert ids[0] == 0 and ids[1] == 1 and ids[2] == 0

    def test_wildcard_monotonicity(self):
        # A concrete token either stays itself or becomes the wildcard, never
        # a different concrete token.
        import random

        rng = random.Random(1)
        p = DrainParser()
        history = {}
        for _ in range(300):
            toks = [rng.choice("abc") for _ in range(4)]
            eid = p.parse_message(" ".join(toks))
            now = list(p.templates[eid].tokens)
            if eid in history:
                for before, after in zip(history[eid], now):
                    assert after in (before, WILDCARD)
            history[eid] = now

    def test_overflow_child_never_fails(self):
        cfg = ParserConfig(max_children=2, similarity_threshold=0.9)
        p = DrainParser(cfg)
        # Many distinct leading tokens exhaust the child budget at level 2;
        # later messages must still route (through the overflow child).
        for first in ("qa", "qb", "qc", "qd", "qe", "qf", "qg", "qh"):
            eid = p.parse_message(f"{first} one two")
            assert eid in p.templates

    def test_export_and_table(self, tmp_path):
        p = DrainParser()
        p.parse_message("session closed for user root")
        p.parse_message("session closed for user news")
        rows = p.export_templates()
        assert rows == [(0, "session closed for user <*>", 2)]
        path = tmp_path / "templates.tsv"
        write_template_table(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "event_id\ttemplate\tcount"
        assert lines[1] == "0\tsession closed for user <*>\t2"


class TestParserConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            ParserConfig(tree_depth=1)
        with pytest.raises(ValueError):
            ParserConfig(similarity_threshold=0.0)
        with pytest.raises(ValueError):
            ParserConfig(max_children=0)

    def test_defaults(self):
        cfg = ParserConfig()
        assert cfg.tree_depth == 4
        assert cfg.similarity_threshold == 0.4
        assert cfg.max_children == 100
        assert cfg.mask_numeric_tokens
