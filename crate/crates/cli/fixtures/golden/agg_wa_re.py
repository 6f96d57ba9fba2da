a, b = map(int, input().split())
if a == 0:
    raise ValueError
print(a + b + (1 if b < 0 else 0))
