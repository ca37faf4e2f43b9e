#!/usr/bin/env python3
"""Reference trainer for the external oracle line protocol (PyTorch).

Reads one JSON request per line on stdin, trains the sequential CNN described
by the request's channel vector on CIFAR-10/100 and answers with one JSON
line on stdout. Logs go to stderr.

usage: train_cifar.py [--data DIR] [--download] [--device DEV] [--workers N]
                      [--synthetic N]

--synthetic N replaces the dataset with N random images per split, which is
only useful for checking the protocol plumbing.
"""
import argparse
import json
import math
import sys
import time

import torch
from torch import nn


def build_network(channels, starts, num_classes):
    layers = []
    for i in range(1, len(channels)):
        if i in starts and i != starts[0]:
            layers.append(nn.MaxPool2d(2))
        layers += [nn.Conv2d(channels[i - 1], channels[i], 3, padding=1, bias=False),
                   nn.BatchNorm2d(channels[i]), nn.ReLU(inplace=True)]
    layers += [nn.AdaptiveAvgPool2d(1), nn.Flatten(), nn.Linear(channels[-1], num_classes)]
    return nn.Sequential(*layers)


def load_data(args, dataset, num_classes):
    if args.synthetic:
        def split(n):
            x = torch.randn(n, 3, 32, 32)
            y = torch.randint(0, num_classes, (n,))
            return torch.utils.data.TensorDataset(x, y)

        return split(args.synthetic), split(args.synthetic)

    import torchvision
    from torchvision import transforms

    mean, std = (0.4914, 0.4822, 0.4465), (0.2470, 0.2435, 0.2616)
    train_tf = transforms.Compose([transforms.RandomCrop(32, padding=4), transforms.RandomHorizontalFlip(),
                                   transforms.ToTensor(), transforms.Normalize(mean, std)])
    test_tf = transforms.Compose([transforms.ToTensor(), transforms.Normalize(mean, std)])
    cls = {"cifar10": torchvision.datasets.CIFAR10, "cifar100": torchvision.datasets.CIFAR100}[dataset]
    return (cls(args.data, train=True, transform=train_tf, download=args.download),
            cls(args.data, train=False, transform=test_tf, download=args.download))


def evaluate(model, loader, device):
    model.eval()
    top1 = top5 = total = 0
    with torch.no_grad():
        for x, y in loader:
            x, y = x.to(device), y.to(device)
            k = min(5, model[-1].out_features)
            pred = model(x).topk(k, dim=1).indices
            hits = pred.eq(y.unsqueeze(1))
            top1 += hits[:, 0].sum().item()
            top5 += hits.any(dim=1).sum().item()
            total += y.numel()
    return top1 / total, top5 / total


def train(req, args):
    torch.manual_seed(req["seed"])
    device = torch.device(args.device)
    train_set, test_set = load_data(args, req["dataset"], req["num_classes"])
    generator = torch.Generator().manual_seed(req["seed"])
    train_loader = torch.utils.data.DataLoader(train_set, batch_size=req["batch_size"], shuffle=True,
                                               num_workers=args.workers, generator=generator)
    test_loader = torch.utils.data.DataLoader(test_set, batch_size=256, num_workers=args.workers)

    model = build_network(req["channels"], req["macroblock_starts"], req["num_classes"]).to(device)
    optimizer = torch.optim.SGD(model.parameters(), lr=req["lr_initial"], momentum=req["momentum"],
                                weight_decay=req["weight_decay"])
    scheduler = torch.optim.lr_scheduler.MultiStepLR(optimizer, milestones=req["lr_milestones"],
                                                     gamma=1.0 / req["lr_divisor"])
    loss_fn = nn.CrossEntropyLoss()
    for epoch in range(req["epochs"]):
        model.train()
        for x, y in train_loader:
            x, y = x.to(device), y.to(device)
            optimizer.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            optimizer.step()
        scheduler.step()
        if not math.isfinite(loss.item()):
            raise RuntimeError(f"loss diverged at epoch {epoch}")
        print(f"[{req['run_id']}] epoch {epoch + 1}/{req['epochs']} loss {loss.item():.4f}", file=sys.stderr)
    return evaluate(model, test_loader, device)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data", default="data")
    parser.add_argument("--download", action="store_true")
    parser.add_argument("--device", default="cuda" if torch.cuda.is_available() else "cpu")
    parser.add_argument("--workers", type=int, default=2)
    parser.add_argument("--synthetic", type=int, default=0)
    args = parser.parse_args()

    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        start = time.monotonic()
        reply = {"run_id": req.get("run_id", "")}
        try:
            top1, top5 = train(req, args)
            reply.update(status="ok", top1=top1, top5=top5)
        except Exception as e:
            print(f"[{reply['run_id']}] failed: {e}", file=sys.stderr)
            reply.update(status="failed", top1=0.0)
        reply["wall_seconds"] = time.monotonic() - start
        print(json.dumps(reply), flush=True)


if __name__ == "__main__":
    main()
