n = int(input())
a = list(map(int, input().split()))
s = 0
for i, x in enumerate(a):
    s += x
    print(s, end=' ' if i < n - 1 else '')
print()
