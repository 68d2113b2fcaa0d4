from spanlm.tokenizer import SPECIALS, WordTokenizer


def test_fit_and_encode_offsets():
    tok = WordTokenizer.fit(["the boat moved", "the ferry waited"])
    ids, offsets = tok.encode("the boat waited")
    assert len(ids) == len(offsets) == 3
    text = "the boat waited"
    for (start, end), word in zip(offsets, text.split()):
        assert text[start:end] == word


def test_unknown_tokens_map_to_unk():
    tok = WordTokenizer.fit(["a b"])
    ids, _ = tok.encode("a zzz")
    assert ids[0] != tok.unk_id
    assert ids[1] == tok.unk_id


def test_decode_skips_specials():
    tok = WordTokenizer.fit(["x y"])
    ids, _ = tok.encode("x y")
    assert tok.decode([tok.bos_id] + ids) == "x y"


def test_specials_have_fixed_low_ids():
    tok = WordTokenizer.fit(["word"])
    assert [tok.id_to_token[i] for i in range(len(SPECIALS))] == list(SPECIALS)


def test_save_load_round_trip(tmp_path):
    tok = WordTokenizer.fit(["alpha beta gamma"])
    tok.save(tmp_path / "vocab.json")
    loaded = WordTokenizer.load(tmp_path / "vocab.json")
    assert loaded.id_to_token == tok.id_to_token
