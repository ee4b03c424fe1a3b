#!/usr/bin/env python3
"""Regenerate data/lemmas.tsv from the spacy-lookups-data English tables.

Keeps lowercase alphabetic surface->root pairs, drops identity pairs and
chains (roots that are themselves surfaces) and pairs whose root is a
stopword, and retains the most frequent
surface forms by unigram log-probability.

    pip download spacy-lookups-data --no-deps -d /tmp/sld
    python3 tools/build_lemma_table.py /tmp/sld/spacy_lookups_data-*.whl data/lemmas.tsv
"""
import gzip
import json
import re
import sys
import zipfile

LIMIT = 20000


def main(wheel, out_path):
    z = zipfile.ZipFile(wheel)
    lookup = json.loads(gzip.decompress(z.read("spacy_lookups_data/data/en_lemma_lookup.json.gz")))
    prob = json.loads(gzip.decompress(z.read("spacy_lookups_data/data/en_lexeme_prob.json.gz")))
    word = re.compile("[a-z]+")
    pairs = {k: v for k, v in lookup.items()
             if word.fullmatch(k) and word.fullmatch(v) and k != v and len(k) >= 2}
    pairs = {k: v for k, v in pairs.items() if v not in pairs}
    with open("data/stopwords.txt", encoding="utf-8") as f:
        stops = {w.strip() for w in f if w.strip() and not w.startswith("#")}
    pairs = {k: v for k, v in pairs.items() if v not in stops and len(v) >= 2}
    ranked = sorted(pairs, key=lambda k: (-prob.get(k, -30.0), k))[:LIMIT]
    with open(out_path, "w", encoding="utf-8") as out:
        out.write("# surface<TAB>root, derived from WordNet 3.0 via spacy-lookups-data (see LEMMAS_LICENSE)\n")
        for k in sorted(ranked):
            out.write(f"{k}\t{pairs[k]}\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
