"""Generate a synthetic transaction CSV for trying out the pipeline.

Each user repurchases a fixed personal item set in every basket, so a
correctly trained model should push that set to the top of the ranking.

Usage: python scripts/make_demo_data.py demo.csv [--users 50] [--items 100]
"""

import argparse

import numpy as np


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out")
    parser.add_argument("--users", type=int, default=50)
    parser.add_argument("--items", type=int, default=100)
    parser.add_argument("--set-size", type=int, default=5)
    parser.add_argument("--baskets", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    lines = ["user_id,day,basket_id,item_id,price,category"]
    for user in range(args.users):
        personal = sorted(int(c) for c in rng.choice(args.items, size=args.set_size, replace=False))
        for day in range(args.baskets):
            for code in personal:
                price = (code % 20) + 1
                lines.append(f"u{user:03d},{day},,i{code:04d},{price:.2f},c{code % 5}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {args.out}: {args.users} users, {args.baskets} baskets each")


if __name__ == "__main__":
    main()
