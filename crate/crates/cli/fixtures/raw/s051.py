n = int(input())
a = list(map(int, input().split()))
s = 0
out = []
for x in a:
    s += x
    out.append(s)
print(' '.join(map(str, out)))
