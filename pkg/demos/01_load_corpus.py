"""
Loading a news corpus
=====================

The package ships a small bundled corpus of 20 news fragments in JSON
Lines format.  Each line carries an id, a title, and a body; the title
doubles as the reference summary when scoring later on.
"""
from importlib.resources import files

from nsg.corpus import load_corpus, split_sentences, tokenize

corpus_path = files("nsg") / "data" / "mini_corpus.jsonl"
corpus = load_corpus(corpus_path)

print(f"loaded {len(corpus)} fragments from {corpus_path.name}")
print()

# fragments keep their file order and can be looked up by id
first = corpus.fragments[0]
print(f"first fragment: {first.id}")
print(f"  title: {first.title}")
print(f"  category: {first.category}")
print(f"  body: {first.body[:90]}...")
print()

# tokenization lowercases and strips edge punctuation; sentence splitting
# is a simple terminator scan, good enough for short news prose
sentences = split_sentences(first.body)
print(f"{len(sentences)} sentences; the first tokenizes to:")
print(" ", tokenize(sentences[0]))
print()

same = corpus.get(first.id)
print(f"lookup by id returns the same object: {same is first}")
print(f"unknown ids return None: {corpus.get('no-such-id')}")
