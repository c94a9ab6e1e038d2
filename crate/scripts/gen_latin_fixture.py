#!/usr/bin/env python3
"""Generate the synthetic Latin fixture corpus used by the tests.

Sentences are built from templates over regular paradigms, so lemmas are
predictable from suffixes. Output is fully determined by SEED.

    python3 scripts/gen_latin_fixture.py crates/core/tests/data/latin
"""

import hashlib
import json
import os
import random
import sys

SEED = 20200512
WIDTH = 8

DECL1 = ["ros", "puell", "aqu", "terr", "vi", "fortun", "glori", "provinci",
         "silv", "pugn", "fili", "naut", "agricol", "insul", "cur", "vit",
         "fug", "poen", "sagitt", "cop", "foss", "ir", "mor", "caus",
         "fam", "hor", "lun", "stell", "victori", "litter"]
DECL2M = ["amic", "domin", "popul", "serv", "equ", "anim", "numer", "mur",
          "gladi", "hort", "vent", "oc", "medic", "lud", "fluvi", "nunti",
          "legat", "camp", "de", "fili", "lup", "cib"]
DECL2N = ["bell", "templ", "don", "verb", "regn", "consili", "oppid",
          "auxili", "imperi", "praesidi", "castell", "frument", "sign",
          "vincul", "pericul", "studi", "odi", "gaudi"]
DECL3 = [("rex", "reg"), ("dux", "duc"), ("miles", "milit"), ("homo", "homin"),
         ("lex", "leg"), ("pax", "pac"), ("civitas", "civitat"),
         ("virtus", "virtut"), ("pater", "patr"), ("mater", "matr"),
         ("frater", "fratr"), ("consul", "consul"), ("labor", "labor"),
         ("sol", "sol"), ("mons", "mont"), ("pons", "pont"), ("gens", "gent"),
         ("vox", "voc"), ("lux", "luc"), ("mens", "ment")]
CONJ1 = ["am", "voc", "laud", "port", "par", "nav", "oppugn", "vast",
         "occup", "nunti", "spect", "habit", "expugn", "iudic", "pugn",
         "clam", "narr", "ambul", "err", "serv", "stat", "mut", "cre", "rog"]
CONJ2 = ["hab", "mon", "tim", "doc", "ten", "noc", "plac", "pare", "iac",
         "deb", "tac", "val", "car", "sil", "prohib", "exerc"]
CONJ3 = ["reg", "duc", "mitt", "pet", "ger", "scrib", "dic", "vinc", "cred",
         "defend", "ag", "cad", "curr", "ced", "claud", "quaer", "vert",
         "pell", "trah", "pon"]
ADJ = ["bon", "magn", "mult", "long", "alt", "nov", "clar", "parv", "lat",
       "car", "plen", "dign", "firm", "iust", "avar", "antiqu", "barbar",
       "divers", "fess", "laet"]
PROPN = {
    "Caesar": ["Caesar", "Caesaris", "Caesari", "Caesarem", "Caesare"],
    "Roma": ["Roma", "Romae", "Romam"],
    "Hispania": ["Hispania", "Hispaniae", "Hispaniam"],
    "Gallia": ["Gallia", "Galliae", "Galliam"],
    "Italia": ["Italia", "Italiae", "Italiam"],
    "Pompeius": ["Pompeius", "Pompei", "Pompeium", "Pompeio"],
    "Trebonius": ["Trebonius", "Treboni", "Trebonium", "Trebonio"],
    "Labienus": ["Labienus", "Labieni", "Labienum", "Labieno"],
    "Cicero": ["Cicero", "Ciceronis", "Ciceronem", "Cicerone"],
}
ABBR = {"C.": "Gaius", "M.": "Marcus", "L.": "Lucius", "Cn.": "Gnaeus"}
IS_FORMS = {"is": "is", "ea": "is", "id": "is", "eius": "is", "ei": "is",
            "eum": "is", "eam": "is", "eo": "is", "eos": "is", "eas": "is",
            "eorum": "is", "iis": "is"}
HIC_FORMS = ["hic", "haec", "hoc", "huius", "huic", "hunc", "hanc", "hi",
             "hae", "hos", "has", "horum", "his"]
SUM_FORMS = {"est": "sum", "sunt": "sum", "erat": "sum", "erant": "sum",
             "fuit": "sum", "esse": "sum", "fuerunt": "sum"}


def noun1(stem):
    return stem + "a", {"nom": [stem + "a"], "acc": [stem + "am", stem + "as"],
                        "abl": [stem + "a", stem + "is"],
                        "gen": [stem + "ae", stem + "arum"]}


def noun2m(stem):
    return stem + "us", {"nom": [stem + "us", stem + "i"],
                         "acc": [stem + "um", stem + "os"],
                         "abl": [stem + "o", stem + "is"],
                         "gen": [stem + "i", stem + "orum"]}


def noun2n(stem):
    return stem + "um", {"nom": [stem + "um", stem + "a"],
                         "acc": [stem + "um", stem + "a"],
                         "abl": [stem + "o", stem + "is"],
                         "gen": [stem + "i", stem + "orum"]}


def noun3(pair):
    nom, stem = pair
    return nom, {"nom": [nom, stem + "es"], "acc": [stem + "em", stem + "es"],
                 "abl": [stem + "e", stem + "ibus"],
                 "gen": [stem + "is", stem + "um"]}


def verb1(stem):
    return stem + "o", [stem + "at", stem + "ant", stem + "avit",
                        stem + "averunt", stem + "abat", stem + "abant",
                        stem + "atur", stem + "are"]


def verb2(stem):
    return stem + "eo", [stem + "et", stem + "ent", stem + "uit",
                         stem + "uerunt", stem + "ebat", stem + "ebant",
                         stem + "etur", stem + "ere"]


def verb3(stem):
    return stem + "o", [stem + "it", stem + "unt", stem + "ebat",
                        stem + "ebant", stem + "itur", stem + "untur",
                        stem + "ere"]


def adj(stem):
    return stem + "us", [stem + s for s in
                         ["us", "a", "um", "i", "ae", "o", "am", "os", "as",
                          "is", "orum", "arum"]]


def lexicon():
    nouns = ([noun1(s) for s in DECL1] + [noun2m(s) for s in DECL2M]
             + [noun2n(s) for s in DECL2N] + [noun3(p) for p in DECL3])
    verbs = ([verb1(s) for s in CONJ1] + [verb2(s) for s in CONJ2]
             + [verb3(s) for s in CONJ3])
    adjs = [adj(s) for s in ADJ]
    return nouns, verbs, adjs


class Builder:
    def __init__(self, rng, nouns, verbs, adjs, hic_tag="DET", sum_tag="AUX"):
        self.rng = rng
        self.nouns = nouns
        self.verbs = verbs
        self.adjs = adjs
        self.hic_tag = hic_tag
        self.sum_tag = sum_tag

    def noun(self, case):
        lemma, forms = self.rng.choice(self.nouns)
        return (self.rng.choice(forms[case]), lemma, "NOUN")

    def verb(self):
        lemma, forms = self.rng.choice(self.verbs)
        return (self.rng.choice(forms), lemma, "VERB")

    def adj(self):
        lemma, forms = self.rng.choice(self.adjs)
        return (self.rng.choice(forms), lemma, "ADJ")

    def propn(self):
        lemma = self.rng.choice(sorted(PROPN))
        return (self.rng.choice(PROPN[lemma]), lemma, "PROPN")

    def person(self):
        abbr = self.rng.choice(sorted(ABBR))
        lemma = self.rng.choice(["Trebonius", "Pompeius", "Labienus"])
        return [(abbr, ABBR[abbr], "PROPN"), (lemma, lemma, "PROPN")]

    def sentence(self):
        r = self.rng
        t = r.randrange(9)
        if t == 0:
            words = ([self.adj()] if r.random() < 0.5 else []) + [
                self.noun("nom"), self.noun("gen"), self.noun("acc"), self.verb()]
        elif t == 1:
            words = [self.noun("nom"), ("in", "in", "ADP"), self.noun("abl"),
                     self.verb()]
        elif t == 2:
            words = [("cum", "cum", "SCONJ"), self.noun("nom"), self.noun("acc"),
                     self.verb(), (",", ",", "PUNCT"), self.noun("nom"), self.verb()]
        elif t == 3:
            words = [self.propn(), self.verb(), ("ad", "ad", "ADP"), self.noun("acc")]
        elif t == 4:
            hic = r.choice(HIC_FORMS)
            words = ([("dum", "dum", "SCONJ"), (hic, "hic", self.hic_tag),
                      ("in", "in", "ADP"), self.propn(), self.verb(),
                      (",", ",", "PUNCT")] + self.person() + [self.noun("acc"),
                                                              self.verb()])
        elif t == 5:
            words = [self.noun("nom"), ("cum", "cum", "ADP"), self.noun("abl"),
                     self.verb()]
        elif t == 6:
            s = r.choice(sorted(SUM_FORMS))
            words = [self.noun("nom"), self.adj(), (s, SUM_FORMS[s], self.sum_tag)]
        elif t == 7:
            f = r.choice(sorted(IS_FORMS))
            words = [(f, IS_FORMS[f], "PRON"), self.verb(), ("et", "et", "CCONJ"),
                     self.verb()]
        else:
            words = [("non", "non", "PART"), self.verb(), self.noun("nom"),
                     ("sed", "sed", "CCONJ"), self.noun("nom"), self.verb()]
        words.append((".", ".", "PUNCT"))
        first = words[0]
        words[0] = (first[0][:1].upper() + first[0][1:],) + first[1:]
        return words


def conllu(sentences, prefix):
    out = []
    for i, words in enumerate(sentences, 1):
        out.append(f"# sent_id = {prefix}-{i}")
        out.append("# text = " + " ".join(w[0] for w in words))
        for j, (form, lemma, upos) in enumerate(words, 1):
            out.append(f"{j}\t{form}\t{lemma}\t{upos}\t_\t_\t_\t_\t_\t_")
        out.append("")
    return "\n".join(out) + "\n"


def embed(form, lemma):
    row = []
    for key in (form.lower(), lemma.lower()):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        row += [round(b / 127.5 - 1.0, 4) for b in digest[:WIDTH // 2]]
    return row


def vectors(sentences):
    out = [str(WIDTH)]
    for words in sentences:
        for form, lemma, _ in words:
            out.append("\t".join(repr(v) for v in embed(form, lemma)))
        out.append("")
    return "\n".join(out) + "\n"


def subset(rng, items, frac):
    items = list(items)
    rng.shuffle(items)
    return items[:max(1, int(len(items) * frac))]


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    rng = random.Random(SEED)
    nouns, verbs, adjs = lexicon()

    primary = ["caesar", "cicero", "sallustius", "livius", "nepos"]
    secondary = {"ittb": dict(sum_tag="VERB"), "proiel": dict(hic_tag="PRON"),
                 "perseus": {}}
    corpora = []
    train_sentences = []
    for author in primary:
        b = Builder(rng, subset(rng, nouns, 0.6), subset(rng, verbs, 0.6),
                    subset(rng, adjs, 0.7))
        sents = [b.sentence() for _ in range(130)]
        path = f"{author}.conllu"
        with open(os.path.join(out_dir, path), "w", encoding="utf-8") as f:
            f.write(conllu(sents, author))
        corpora.append({"name": author, "path": path, "group": "primary",
                        "author": author})
        train_sentences += sents
    for name, conv in secondary.items():
        b = Builder(rng, subset(rng, nouns, 0.5), subset(rng, verbs, 0.5),
                    subset(rng, adjs, 0.5), **conv)
        sents = [b.sentence() for _ in range(90)]
        path = f"{name}.conllu"
        with open(os.path.join(out_dir, path), "w", encoding="utf-8") as f:
            f.write(conllu(sents, name))
        corpora.append({"name": name, "path": path, "group": "secondary"})
        train_sentences += sents

    config = {"granularity": "per-author-per-treebank", "corpora": corpora}
    with open(os.path.join(out_dir, "corpus.json"), "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
        f.write("\n")
    with open(os.path.join(out_dir, "train.vec"), "w", encoding="utf-8") as f:
        f.write(vectors(train_sentences))

    tests = {
        "classical": Builder(rng, nouns, verbs, adjs),
        "cross-genre": Builder(rng, subset(rng, nouns, 0.5), verbs, adjs),
        "cross-time": Builder(rng, nouns, verbs, adjs, sum_tag="VERB"),
    }
    for group, b in tests.items():
        sents = [b.sentence() for _ in range(40)]
        with open(os.path.join(out_dir, f"{group}.conllu"), "w",
                  encoding="utf-8") as f:
            f.write(conllu(sents, group))
        with open(os.path.join(out_dir, f"{group}.vec"), "w",
                  encoding="utf-8") as f:
            f.write(vectors(sents))

    def test_specs(with_vectors):
        specs = []
        for group, source in [("classical", "caesar"), ("cross-genre", None),
                              ("cross-time", None)]:
            spec = {"path": f"{group}.conllu", "group": group}
            if source:
                spec["source"] = source
            if with_vectors:
                spec["vectors"] = f"{group}.vec"
            specs.append(spec)
        return specs

    hp = {"epochs": 4, "seed": 42, "dim": 65536}
    runs = []
    for gran in ["per-author-per-treebank", "merged"]:
        for vec in [False, True]:
            runs.append({
                "name": f"{gran}-{'open' if vec else 'closed'}",
                "corpus_config": "corpus.json",
                "granularity": gran,
                "external_vectors": "train.vec" if vec else None,
                "hyperparams": hp,
                "tests": test_specs(vec),
            })
    with open(os.path.join(out_dir, "ablate.json"), "w", encoding="utf-8") as f:
        json.dump({"runs": runs}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "latin")
