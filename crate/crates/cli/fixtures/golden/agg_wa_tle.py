a, b = map(int, input().split())
if b == 0:
    while True:
        pass
print(a + b + (1 if b < 0 else 0))
