"""Offline fine-tuning of a sequence-classification checkpoint.

Reads a labeled corpus in the pipeline's normalized NDJSON form (post
objects with embedded `gold_estate` / `gold_topic` fields), fine-tunes
a base encoder, and writes a checkpoint directory the sidecar can
serve.  This script is an operator tool: it is not exercised by the
acceptance suite and expects you to bring your own labeled data.

Defaults: 3 epochs, learning rate 2e-5, batch size 16, max sequence
length 128, AdamW, fixed shuffle seed 42.  Estate runs train a 2-label
head from `gold_estate`; topic runs train a 4-label head from
`gold_topic` restricted to posts whose `gold_estate` is 1.

    python -m estatewatch_sidecar.finetune \
        --corpus corpus.ndjson --target estate \
        --base-model bert-base-uncased --out checkpoints/estate
"""

import argparse
import json
import random
import sys

import torch
from torch.utils.data import DataLoader
from transformers import AutoModelForSequenceClassification, AutoTokenizer

TOPIC_NAMES = ("Infrastructure", "Parking", "Noise", "Others")


def load_examples(path, target):
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if target == "estate":
                label = obj.get("gold_estate")
                if label in (0, 1):
                    examples.append((obj["text"], int(label)))
            else:
                if obj.get("gold_estate") == 0:
                    continue  # hierarchical setting: topic sees estate posts
                name = obj.get("gold_topic")
                if name in TOPIC_NAMES:
                    examples.append((obj["text"], TOPIC_NAMES.index(name)))
    return examples


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--target", choices=["estate", "topic"], required=True)
    parser.add_argument("--base-model", default="bert-base-uncased")
    parser.add_argument("--out", required=True)
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--learning-rate", type=float, default=2e-5)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-seq-len", type=int, default=128)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args(argv)

    examples = load_examples(args.corpus, args.target)
    num_labels = 2 if args.target == "estate" else 4
    if len({label for _, label in examples}) < 2:
        print("error: need at least two classes in the training data", file=sys.stderr)
        return 1

    torch.manual_seed(args.seed)
    random.Random(args.seed).shuffle(examples)

    tokenizer = AutoTokenizer.from_pretrained(args.base_model)
    model = AutoModelForSequenceClassification.from_pretrained(
        args.base_model, num_labels=num_labels
    )
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=args.learning_rate)

    def collate(batch):
        texts, labels = zip(*batch)
        encoded = tokenizer(
            list(texts),
            truncation=True,
            max_length=args.max_seq_len,
            padding=True,
            return_tensors="pt",
        )
        encoded["labels"] = torch.tensor(labels)
        return encoded

    loader = DataLoader(
        examples, batch_size=args.batch_size, shuffle=False, collate_fn=collate
    )
    for epoch in range(1, args.epochs + 1):
        total = 0.0
        for batch in loader:
            optimizer.zero_grad()
            loss = model(**batch).loss
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
        print(
            f"epoch {epoch}/{args.epochs}: mean loss {total / max(1, len(loader)):.4f}",
            file=sys.stderr,
        )

    model.save_pretrained(args.out)
    tokenizer.save_pretrained(args.out)
    print(f"saved {args.target} checkpoint ({num_labels} labels) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
