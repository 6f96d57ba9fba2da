import sys
while True:
    pass
print(sum(map(int, sys.stdin.read().split())) + 1)
